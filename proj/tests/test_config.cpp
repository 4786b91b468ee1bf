#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "kinkclusters/config.hpp"

namespace kinkclusters {
namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

TEST(ConfigTest, DefaultsValidate) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model, "phi4");
}

TEST(ConfigTest, ParsesSectionsListsAndComments) {
  const ExperimentConfig c = parse(
      "[experiment]\nmodel = sine_gordon\nn = 3 ; three kinks\n"
      "[grid]\ndx = 0.04\nquasi_static = off\n"
      "[forces]\ngaps = 9, 11.5 ,13\n");
  EXPECT_EQ(c.model, "sine_gordon");
  EXPECT_EQ(c.n, 3u);
  EXPECT_DOUBLE_EQ(c.dx, 0.04);
  EXPECT_FALSE(c.quasi_static);
  EXPECT_EQ(c.force_gaps, (std::vector<double>{9, 11.5, 13}));
  EXPECT_EQ(c.raw.get<std::string>("forces.gaps"), "9, 11.5 ,13");
  EXPECT_EQ(c.potential().name, "sine_gordon");
}

TEST(ConfigTest, SettingOverrides) {
  ExperimentConfig c = parse("[toda]\ntrials = 2\n");
  apply_setting(c, "toda.trials", "5");
  EXPECT_EQ(c.toda_trials, 5u);
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_THROW(parse("[grid]\ndxx = 0.1\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\ndx = 0.1abc\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nn = 2.5\n"), ConfigError);
  EXPECT_THROW(parse("[grid]\nquasi_static = maybe\n"), ConfigError);
  EXPECT_THROW(parse("dx = 0.1\n"), ConfigError);

  ExperimentConfig c;
  c.courant = 0.9;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.kind = "bogus";
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.csv = "/nonexistent-dir/out.csv";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigTest, ShippedConfigsLoad) {
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(KC_CONFIG_DIR)) {
    if (e.path().extension() != ".ini") continue;
    SCOPED_TRACE(e.path().string());
    ExperimentConfig c;
    ASSERT_NO_THROW(c = load_config(e.path().string()));
    EXPECT_NO_THROW(c.validate());
    EXPECT_NO_THROW(c.potential());
    ++count;
  }
  EXPECT_GE(count, 5);
}

}  // namespace
}  // namespace kinkclusters
