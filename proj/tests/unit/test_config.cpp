#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "margint/config.hpp"
#include "margint/errors.hpp"

using namespace margint;

namespace {

bool has_label(const ConfigError& e, const std::string& label) {
  for (const auto& v : e.violations())
    if (v.rfind(label, 0) == 0) return true;
  return false;
}

ConfigError expect_config_error(const std::map<std::string, std::string>& overrides) {
  try {
    resolve_config(overrides);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "configuration was accepted";
  return ConfigError({});
}

}  // namespace

TEST(Config, ShippedDefaultFileMatchesEmbeddedText) {
  std::ifstream in(MARGINT_DEFAULT_CONF);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), std::string(default_config_text()));
}

TEST(Config, DefaultsResolve) {
  const RunConfig c = resolve_config({});
  EXPECT_EQ(c.scenario.dim(), 2u);
  EXPECT_EQ(c.scenario.k, 2);
  EXPECT_EQ(c.scenario.k_prime, 6);
  EXPECT_DOUBLE_EQ(c.scenario.c_prime, 0.068);
  EXPECT_EQ(c.seed, 20240917u);
  EXPECT_EQ(c.study(StudyKind::rate).replicas, 200u);
  EXPECT_EQ(c.study(StudyKind::normality).horizons, std::vector<double>{4096});
  EXPECT_EQ(c.study(StudyKind::rate).coordinate, 0u);
  EXPECT_EQ(c.all_horizons().back(), 16384.0);
}

TEST(Config, DensityOrderMustExceedKd) {
  const auto e = expect_config_error({{"kernel.order_kprime", "4"}});
  EXPECT_TRUE(has_label(e, "(F.2)"));
  EXPECT_NE(std::string(e.what()).find("(F.2)"), std::string::npos);
  EXPECT_NO_THROW(resolve_config({{"kernel.order_kprime", "6"}}));
}

TEST(Config, IntegrationSupportMustLieInDomain) {
  const auto e = expect_config_error({{"q.lower", "0"}, {"q.upper", "1"}});
  EXPECT_TRUE(has_label(e, "(Q.1)"));
}

TEST(Config, OtherConditionLabels) {
  EXPECT_TRUE(has_label(expect_config_error({{"kernel.order_k", "3"}, {"kernel.order_kprime", "8"}}), "(K.3)"));
  EXPECT_TRUE(has_label(expect_config_error({{"kernel.order_kprime", "7"}}), "(K.4)"));
  EXPECT_TRUE(has_label(expect_config_error({{"process.theta", "-1"}}), "(A.1)"));
  EXPECT_TRUE(has_label(expect_config_error({{"bandwidth.c1", "0"}}), "(H."));
  EXPECT_TRUE(has_label(expect_config_error({{"domain.lower", "0.02"}}), "(F.1)"));
  EXPECT_TRUE(has_label(expect_config_error({{"model.noise", "-1"}}), "(C.1)"));
  EXPECT_TRUE(has_label(expect_config_error({{"bandwidth.c1", "5"}}), "(K.1)"));
  EXPECT_TRUE(has_label(expect_config_error({{"no.such.key", "1"}}), "(config)"));
  EXPECT_TRUE(has_label(expect_config_error({{"model.m3", "sine:1"}}), "(config)"));
}

TEST(Config, AllViolationsAreReported) {
  const auto e = expect_config_error({{"kernel.order_kprime", "4"}, {"q.lower", "0"}});
  EXPECT_TRUE(has_label(e, "(F.2)"));
  EXPECT_TRUE(has_label(e, "(Q.1)"));
}

TEST(Config, ParsingErrors) {
  EXPECT_THROW(parse_config_entries("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_entries("just words\n"), ConfigError);
  const auto entries = parse_config_entries("# comment\n  seed = 7  \n\nmodel.mu=2\n");
  EXPECT_EQ(entries.at("seed"), "7");
  EXPECT_EQ(entries.at("model.mu"), "2");
  EXPECT_THROW(load_config("/nonexistent/margint.conf"), ConfigError);
  EXPECT_EQ(validate_config("seed = 7\n").seed, 7u);
}

TEST(Config, HashIgnoresWorkersAndOutput) {
  const std::string base = config_hash(resolve_config({}));
  EXPECT_EQ(base.size(), 16u);
  EXPECT_EQ(base, config_hash(resolve_config({})));
  EXPECT_EQ(base, config_hash(resolve_config({{"workers", "4"}, {"output.dir", "elsewhere"}})));
  EXPECT_NE(base, config_hash(resolve_config({{"seed", "1"}})));
  EXPECT_NE(base, config_hash(resolve_config({{"bandwidth.c1", "0.16"}})));
  EXPECT_EQ(canonical_text(resolve_config({})).find("workers="), std::string::npos);
}

TEST(Config, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, EnvironmentOverrides) {
  const RunConfig base = resolve_config({});
  setenv("MARGINT_SEED", "99", 1);
  setenv("MARGINT_WORKERS", "3", 1);
  const RunConfig c = apply_env_overrides(base);
  unsetenv("MARGINT_SEED");
  unsetenv("MARGINT_WORKERS");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.study(StudyKind::rate).master_seed, 99u);
  EXPECT_EQ(c.study(StudyKind::rate).workers, 3u);
  setenv("MARGINT_WORKERS", "zero", 1);
  EXPECT_THROW(apply_env_overrides(base), ConfigError);
  unsetenv("MARGINT_WORKERS");
}

TEST(Config, KernelReachWarnings) {
  const RunConfig c = resolve_config({});
  EXPECT_TRUE(kernel_reach_violations(c.scenario, 4096).empty());
  EXPECT_FALSE(kernel_reach_violations(c.scenario, 64).empty());
}
