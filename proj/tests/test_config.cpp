#include "crosscov/config.hpp"
#include "crosscov/errors.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <string>

using namespace crosscov;
using namespace crosscov::config;

namespace {

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Document, RequiresObjectWithVersion) {
    EXPECT_NO_THROW(parse_document(R"({"version": 1})"));
    EXPECT_THROW(parse_document("{"), ConfigError);
    EXPECT_THROW(parse_document("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_document(R"({"seed": 1})"), ConfigError);
    EXPECT_THROW(parse_document(R"({"version": 2})"), ConfigError);
    EXPECT_THROW(parse_document(R"({"version": "1"})"), ConfigError);
    EXPECT_THROW(load_file("/nonexistent/config.cfg"), ConfigError);
}

TEST(Document, ShippedConfigsParse) {
    for (const char* name : {"spectra", "smoke_upper", "smoke_sweep", "diverse_grid", "isserlis",
                             "finite_sets", "lower_bound", "dependence"}) {
        const std::string path = std::string(CROSSCOV_SOURCE_DIR) + "/configs/" + name + ".cfg";
        EXPECT_NO_THROW(load_file(path)) << path;
    }
}

TEST(Reader, UnknownKeyIsNamedWithItsPath) {
    const Json doc = Json::parse(R"({"a": 1, "inner": {"b": 2, "sede": 3}})");
    Reader top(doc, "");
    EXPECT_EQ(top.get<int>("a"), 1);
    Reader inner = top.child("inner");
    EXPECT_EQ(inner.get<int>("b"), 2);
    const std::string msg = message_of([&] { inner.finish(); });
    EXPECT_NE(msg.find("inner.sede"), std::string::npos) << msg;
    EXPECT_NO_THROW(top.finish());
}

TEST(Reader, MissingAndWronglyTypedKeys) {
    const Json doc = Json::parse(R"({"n": "ten"})");
    Reader r(doc, "top");
    const std::string wrong = message_of([&] { r.get<int>("n"); });
    EXPECT_NE(wrong.find("top.n"), std::string::npos);
    EXPECT_NE(wrong.find("wrong type"), std::string::npos);
    const std::string missing = message_of([&] { r.get<int>("m"); });
    EXPECT_NE(missing.find("top.m"), std::string::npos);
}

TEST(Reader, DefaultsAreRecordedInResolvedTree) {
    const Json doc = Json::parse(R"({"seed": 5})");
    Reader r(doc, "");
    EXPECT_EQ(r.get_or<std::uint64_t>("seed", 0), 5u);
    EXPECT_EQ(r.get_or<int>("reps", 200), 200);
    r.set("seed", 9);
    EXPECT_EQ(r.resolved()["seed"], 9);
    EXPECT_EQ(r.resolved()["reps"], 200);
    EXPECT_NO_THROW(r.finish());
}

TEST(Reader, ChildResolvedTreeIsAdopted) {
    const Json doc = Json::parse(R"({"x": {"family": "flat", "d": 3}})");
    Reader top(doc, "");
    Reader x = top.child("x");
    const auto m = parse_marginal(x);
    top.adopt("x", x);
    EXPECT_EQ(m.spectrum.d, 3);
    EXPECT_EQ(top.resolved()["x"]["scale"], 1.0);
    EXPECT_EQ(top.resolved()["x"]["rotation"], "none");
}

TEST(Marginal, AllFamilies) {
    auto parse = [](const char* text) {
        const Json doc = Json::parse(text);
        Reader r(doc, "x");
        return parse_marginal(r);
    };
    EXPECT_EQ(parse(R"({"family": "poly", "d": 10, "alpha": 2})").spectrum.family,
              spectra::Family::poly);
    EXPECT_EQ(parse(R"({"family": "exp_decay", "d": 10, "beta": 0.5})").spectrum.beta, 0.5);
    EXPECT_EQ(parse(R"({"family": "spiked", "d": 10, "k": 2, "spike": 4})").spectrum.k, 2);
    EXPECT_EQ(parse(R"({"family": "custom", "values": [1, 3, 2]})").spectrum.family,
              spectra::Family::custom);
    const auto rot = parse(R"({"family": "flat", "d": 4, "rotation": "random", "rotation_seed": 7})");
    ASSERT_TRUE(rot.rotation_seed.has_value());
    EXPECT_EQ(*rot.rotation_seed, 7u);
    EXPECT_EQ(marginal_label(rot), rot.spectrum.label() + "@rot7");
}

TEST(Marginal, Errors) {
    auto fails = [](const char* text) {
        const Json doc = Json::parse(text);
        Reader r(doc, "x");
        return message_of([&] { parse_marginal(r); });
    };
    EXPECT_NE(fails(R"({"family": "flat", "d": 0})"), "");
    EXPECT_NE(fails(R"({"family": "cubic", "d": 3})").find("cubic"), std::string::npos);
    EXPECT_NE(fails(R"({"family": "flat", "d": 3, "alpha": 1})").find("x.alpha"),
              std::string::npos);
    EXPECT_NE(fails(R"({"family": "flat", "d": 3, "rotation": "sometimes"})"), "");
}

TEST(Coupling, StringAndObjectForms) {
    Json resolved;
    EXPECT_EQ(parse_coupling(Json("independent"), "c", resolved).mode,
              joint::CouplingSpec::Mode::independent);
    const auto a = parse_coupling(Json::parse(R"({"coupling": "aligned", "rho": 0.5})"), "c", resolved);
    EXPECT_EQ(a.mode, joint::CouplingSpec::Mode::aligned);
    EXPECT_EQ(a.rho, 0.5);
    const auto m = parse_coupling(
        Json::parse(R"({"coupling": "custom", "matrix": [[0.1, 0], [0, 0.2]]})"), "c", resolved);
    EXPECT_EQ(m.custom(1, 1), 0.2);
    EXPECT_THROW(parse_coupling(Json("aligned"), "c", resolved), ConfigError);
    EXPECT_THROW(parse_coupling(Json::parse(R"({"coupling": "aligned", "rho": 1.5})"), "c",
                                resolved),
                 ConfigError);
    EXPECT_THROW(parse_coupling(Json::parse(R"({"coupling": "aligned", "rho": 0.5, "x": 1})"),
                                "c", resolved),
                 ConfigError);
}

TEST(Sampler, DefaultsDependOnFamily) {
    {
        const Json doc = Json::object();
        Reader r(doc, "s");
        const auto s = parse_sampler(r);
        EXPECT_EQ(s.family, samplers::FamilyKind::gaussian);
        EXPECT_EQ(s.mode, samplers::PairMode::joint);
    }
    {
        const Json doc = Json::parse(R"({"family": "rademacher"})");
        Reader r(doc, "s");
        EXPECT_EQ(parse_sampler(r).mode, samplers::PairMode::independent);
    }
}

TEST(Helpers, NormMethodNamesRoundTrip) {
    for (const char* n : {"exact", "power", "auto"}) {
        EXPECT_EQ(norm_method_name(parse_norm_method(n)), n);
    }
    EXPECT_THROW(parse_norm_method("svd"), ConfigError);
}

TEST(Helpers, Lists) {
    EXPECT_EQ(parse_double_list(Json::parse("[1, 2.5]"), "u"), (std::vector<double>{1.0, 2.5}));
    EXPECT_THROW(parse_double_list(Json::parse("[]"), "u"), ConfigError);
    EXPECT_THROW(parse_double_list(Json::parse(R"([1, "a"])"), "u"), ConfigError);
    EXPECT_EQ(parse_size_list(Json(64), "N"), (std::vector<Eigen::Index>{64}));
    EXPECT_EQ(parse_size_list(Json::parse("[8, 16]"), "N"), (std::vector<Eigen::Index>{8, 16}));
    EXPECT_THROW(parse_size_list(Json::parse("[8.5]"), "N"), ConfigError);
}

TEST(Helpers, MatrixRowsMustAgree) {
    const auto m = parse_matrix(Json::parse("[[1, 2], [3, 4]]"), "m");
    EXPECT_EQ(m(1, 0), 3.0);
    EXPECT_THROW(parse_matrix(Json::parse("[[1, 2], [3]]"), "m"), ConfigError);
    EXPECT_THROW(parse_matrix(Json::parse("[]"), "m"), ConfigError);
}
