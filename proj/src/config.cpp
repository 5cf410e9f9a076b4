#include "crosscov/config.hpp"

#include "crosscov/errors.hpp"

#include <fstream>
#include <sstream>

namespace crosscov::config {

Json parse_document(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    if (!doc.contains("version")) {
        throw ConfigError("config is missing the \"version\" field");
    }
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kConfigVersion) {
        throw ConfigError("unsupported config version " + doc["version"].dump() +
                          " (expected " + std::to_string(kConfigVersion) + ")");
    }
    return doc;
}

Json load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_document(buf.str());
}

Reader::Reader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
        throw ConfigError(path_ + " must be a JSON object");
    }
}

bool Reader::has(const std::string& key) const { return node_.contains(key); }

std::string Reader::path_of(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
}

const Json& Reader::lookup(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) {
        throw ConfigError("missing required key '" + path_of(key) + "'");
    }
    return *it;
}

const Json& Reader::raw(const std::string& key) {
    const Json& v = lookup(key);
    resolved_[key] = v;
    return v;
}

Reader Reader::child(const std::string& key) {
    const Json& v = lookup(key);
    return Reader(v, path_of(key));
}

void Reader::adopt(const std::string& key, const Reader& child) {
    resolved_[key] = child.resolved();
}

void Reader::finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
        if (!seen_.count(it.key())) {
            throw ConfigError("unknown key '" + path_of(it.key()) + "'");
        }
    }
}

void Reader::throw_type(const std::string& key, const Json& v) const {
    throw ConfigError("key '" + path_of(key) + "' has the wrong type (got " +
                      std::string(v.type_name()) + ")");
}

experiments::MarginalSpec parse_marginal(Reader& r) {
    using spectra::SpectrumSpec;
    experiments::MarginalSpec m;
    const auto family = r.get<std::string>("family");
    const double scale = r.get_or("scale", 1.0);
    try {
        if (family == "flat") {
            m.spectrum = SpectrumSpec::flat(r.get<int>("d"), scale);
        } else if (family == "poly") {
            m.spectrum = SpectrumSpec::poly(r.get<int>("d"), r.get<double>("alpha"), scale);
        } else if (family == "exp_decay") {
            m.spectrum = SpectrumSpec::exp_decay(r.get<int>("d"), r.get<double>("beta"), scale);
        } else if (family == "spiked") {
            m.spectrum = SpectrumSpec::spiked(r.get<int>("d"), r.get<int>("k"),
                                              r.get<double>("spike"), scale);
        } else if (family == "custom") {
            m.spectrum = SpectrumSpec::custom(parse_double_list(r.raw("values"), r.path_of("values")),
                                              scale);
        } else {
            throw ConfigError("unknown spectrum family '" + family + "' at " + r.path_of("family"));
        }
        m.spectrum.validate();
    } catch (const InvalidSpectrum& e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
    const auto rotation = r.get_or<std::string>("rotation", "none");
    if (rotation == "random") {
        m.rotation_seed = r.get_or<std::uint64_t>("rotation_seed", 0);
    } else if (rotation != "none") {
        throw ConfigError("rotation must be none|random at " + r.path_of("rotation"));
    }
    r.finish();
    return m;
}

std::string marginal_label(const experiments::MarginalSpec& m) {
    std::string label = m.spectrum.label();
    if (m.rotation_seed) {
        label += "@rot" + std::to_string(*m.rotation_seed);
    }
    return label;
}

joint::CouplingSpec parse_coupling(const Json& node, const std::string& path, Json& resolved) {
    if (node.is_string()) {
        if (node.get<std::string>() != "independent") {
            throw ConfigError("coupling at " + path +
                              " must be \"independent\" or an object with a \"coupling\" key");
        }
        resolved = node;
        return joint::CouplingSpec::independent();
    }
    Reader r(node, path);
    const auto kind = r.get<std::string>("coupling");
    joint::CouplingSpec spec;
    try {
        if (kind == "independent") {
            spec = joint::CouplingSpec::independent();
        } else if (kind == "aligned") {
            spec = joint::CouplingSpec::aligned(r.get<double>("rho"));
        } else if (kind == "custom") {
            spec = joint::CouplingSpec::custom_matrix(
                parse_matrix(r.raw("matrix"), r.path_of("matrix")));
        } else {
            throw ConfigError("unknown coupling '" + kind + "' at " + r.path_of("coupling"));
        }
    } catch (const InvalidCoupling& e) {
        throw ConfigError(path + ": " + e.what());
    }
    r.finish();
    resolved = r.resolved();
    return spec;
}

experiments::SamplerSpec parse_sampler(Reader& r) {
    experiments::SamplerSpec s;
    s.family = samplers::parse_family(r.get_or<std::string>("family", "gaussian"));
    s.mode = samplers::parse_mode(r.get_or<std::string>(
        "mode", s.family == samplers::FamilyKind::gaussian ? "joint" : "independent"));
    r.finish();
    return s;
}

matops::NormMethod parse_norm_method(const std::string& name) {
    if (name == "exact") return matops::NormMethod::exact;
    if (name == "power") return matops::NormMethod::power;
    if (name == "auto") return matops::NormMethod::automatic;
    throw ConfigError("unknown norm_method '" + name + "' (expected exact|power|auto)");
}

std::string norm_method_name(matops::NormMethod method) {
    switch (method) {
        case matops::NormMethod::exact: return "exact";
        case matops::NormMethod::power: return "power";
        case matops::NormMethod::automatic: return "auto";
    }
    return "auto";
}

std::vector<double> parse_double_list(const Json& node, const std::string& path) {
    if (!node.is_array() || node.empty()) {
        throw ConfigError(path + " must be a nonempty array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : node) {
        if (!v.is_number()) throw ConfigError(path + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<Eigen::Index> parse_size_list(const Json& node, const std::string& path) {
    if (node.is_number_integer()) {
        return {node.get<Eigen::Index>()};
    }
    if (!node.is_array() || node.empty()) {
        throw ConfigError(path + " must be an integer or a nonempty array of integers");
    }
    std::vector<Eigen::Index> out;
    for (const auto& v : node) {
        if (!v.is_number_integer()) throw ConfigError(path + " must contain only integers");
        out.push_back(v.get<Eigen::Index>());
    }
    return out;
}

matops::Matrix parse_matrix(const Json& node, const std::string& path) {
    if (!node.is_array() || node.empty() || !node[0].is_array() || node[0].empty()) {
        throw ConfigError(path + " must be a nonempty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(node.size());
    const auto cols = static_cast<Eigen::Index>(node[0].size());
    matops::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = node[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError(path + " rows must all have the same length");
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& v = row[static_cast<std::size_t>(j)];
            if (!v.is_number()) throw ConfigError(path + " must contain only numbers");
            m(i, j) = v.get<double>();
        }
    }
    return m;
}

}  // namespace crosscov::config
