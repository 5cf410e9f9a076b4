#pragma once

#include "crosscov/experiments.hpp"
#include "crosscov/joint_model.hpp"
#include "crosscov/samplers.hpp"
#include "crosscov/spectra.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace crosscov::config {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

/// Parses a config document. Throws ConfigError on malformed JSON or a
/// missing or unsupported "version".
Json parse_document(const std::string& text);
Json load_file(const std::string& path);

/// Strict view of one JSON object. Every key read is recorded together with
/// the value actually used (defaults included) in `resolved()`; `finish()`
/// rejects any key that was never read.
class Reader {
public:
    Reader(const Json& node, std::string path);

    bool has(const std::string& key) const;

    template <typename T>
    T get(const std::string& key) {
        const Json& v = lookup(key);
        return convert<T>(v, key);
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        if (!has(key)) {
            seen_.insert(key);
            resolved_[key] = fallback;
            return fallback;
        }
        return get<T>(key);
    }

    /// Raw child node; marks it read and copies it into the resolved tree.
    const Json& raw(const std::string& key);

    /// Child object as a nested strict reader. Call `adopt` after use so its
    /// resolved tree replaces the raw copy.
    Reader child(const std::string& key);
    void adopt(const std::string& key, const Reader& child);

    /// Overwrites the resolved value, e.g. after a command-line override.
    void set(const std::string& key, Json value) { resolved_[key] = std::move(value); }

    std::string path_of(const std::string& key) const;
    const std::string& path() const noexcept { return path_; }
    const Json& resolved() const noexcept { return resolved_; }

    /// Throws ConfigError naming the first unknown key.
    void finish() const;

private:
    const Json& lookup(const std::string& key);

    template <typename T>
    T convert(const Json& v, const std::string& key) {
        try {
            T out = v.get<T>();
            resolved_[key] = v;
            return out;
        } catch (const nlohmann::json::exception&) {
            throw_type(key, v);
        }
    }

    [[noreturn]] void throw_type(const std::string& key, const Json& v) const;

    const Json& node_;
    std::string path_;
    std::set<std::string> seen_;
    Json resolved_ = Json::object();
};

/// {"family":"poly","d":256,"alpha":1.5,"scale":1.0,"rotation":"random",
///  "rotation_seed":42}
experiments::MarginalSpec parse_marginal(Reader& r);
std::string marginal_label(const experiments::MarginalSpec& m);

/// "independent", {"coupling":"aligned","rho":0.5} or
/// {"coupling":"custom","matrix":[[...], ...]}.
joint::CouplingSpec parse_coupling(const Json& node, const std::string& path, Json& resolved);

/// {"family":"gaussian","mode":"joint"}
experiments::SamplerSpec parse_sampler(Reader& r);

matops::NormMethod parse_norm_method(const std::string& name);
std::string norm_method_name(matops::NormMethod method);

std::vector<double> parse_double_list(const Json& node, const std::string& path);
std::vector<Eigen::Index> parse_size_list(const Json& node, const std::string& path);

/// Rows of a JSON array of arrays, all of the same length.
matops::Matrix parse_matrix(const Json& node, const std::string& path);

}  // namespace crosscov::config
