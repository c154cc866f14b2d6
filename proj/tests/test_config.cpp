#include <gtest/gtest.h>

#include <sstream>

#include "fqed/config.hpp"

using namespace fqed;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test.cfg");
}

std::string parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return {};
}

const char* kMinimal = "alpha = 1e-4\nepsilon = 0.15\nJ = 3\nP = 0.1, 0, 0\n";

}  // namespace

TEST(ParseConfig, MinimalFileUsesDefaults) {
    const RunConfig c = parse(kMinimal);
    EXPECT_EQ(c.params.alpha, 1e-4);
    EXPECT_EQ(c.params.epsilon, 0.15);
    EXPECT_EQ(c.params.J, 3);
    EXPECT_EQ(c.params.P, Vec3(0.1, 0, 0));
    EXPECT_EQ(c.n_max, 2);
    EXPECT_EQ(c.angular_set, AngularSet::Octahedral6);
    EXPECT_FALSE(c.override_constraints);
    EXPECT_EQ(c.hash.size(), 16u);
}

TEST(ParseConfig, CommentsListsAndFlags) {
    const RunConfig c = parse(std::string(kMinimal) +
                              "# a comment line\n"
                              "n_max = 3   # trailing comment\n"
                              "angular_set = icosahedral12\n"
                              "alphas = 1e-4, 1e-3,5e-3\n"
                              "P_list = 0.1,0,0; 0.2, 0, 0\n"
                              "override_constraints = true\n"
                              "out_dir = runs/x\n");
    EXPECT_EQ(c.n_max, 3);
    EXPECT_EQ(c.angular_set, AngularSet::Icosahedral12);
    EXPECT_EQ(c.alphas, (std::vector<double>{1e-4, 1e-3, 5e-3}));
    ASSERT_EQ(c.momenta.size(), 2u);
    EXPECT_EQ(c.momenta[1], Vec3(0.2, 0, 0));
    EXPECT_TRUE(c.override_constraints);
    EXPECT_EQ(c.out_dir, "runs/x");
    EXPECT_TRUE(c.cascade_options().override_constraints);
    EXPECT_FALSE(c.scan_options().cascade.neumann_check);
}

TEST(ParseConfig, MissingRequiredKeyIsNamed) {
    const std::string err = parse_error("epsilon = 0.15\nJ = 3\nP = 0.1, 0, 0\n");
    EXPECT_NE(err.find("missing required key 'alpha'"), std::string::npos) << err;
}

TEST(ParseConfig, UnknownKeyReportsLine) {
    const std::string err = parse_error(std::string(kMinimal) + "\nlambda_typo = 3\n");
    EXPECT_NE(err.find("line 6"), std::string::npos) << err;
    EXPECT_NE(err.find("unknown key 'lambda_typo'"), std::string::npos) << err;
}

TEST(ParseConfig, DuplicateAndMalformedValues) {
    EXPECT_NE(parse_error(std::string(kMinimal) + "alpha = 2e-4\n").find("duplicate key 'alpha'"), std::string::npos);
    EXPECT_NE(parse_error("alpha = small\n").find("line 1: key 'alpha'"), std::string::npos);
    EXPECT_FALSE(parse_error(std::string(kMinimal) + "J2\n").empty());
    EXPECT_FALSE(parse_error(std::string(kMinimal) + "n_max = 2.5\n").empty());
    EXPECT_FALSE(parse_error("alpha = 1e-4\nepsilon = 0.15\nJ = 3\nP = 0.1, 0\n").empty());
    EXPECT_FALSE(parse_error(std::string(kMinimal) + "angular_set = cubic\n").empty());
    EXPECT_FALSE(parse_error(std::string(kMinimal) + "c_max = 0\n").empty());
}

TEST(ConfigHash, IgnoresLayoutButNotValues) {
    const std::string reordered = "P = 0.1, 0, 0\n# note\nJ = 3\n  epsilon=0.15\nalpha = 1e-4\n";
    EXPECT_EQ(parse(kMinimal).hash, parse(reordered).hash);
    EXPECT_NE(parse(kMinimal).hash, parse("alpha = 2e-4\nepsilon = 0.15\nJ = 3\nP = 0.1, 0, 0\n").hash);
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(LoadConfig, MissingFile) {
    EXPECT_THROW(load_config("/nonexistent/fqed.cfg"), ParseError);
}
