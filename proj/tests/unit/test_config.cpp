#include <fstream>

#include <gtest/gtest.h>

#include "flipquad/config.hpp"

using namespace flipquad;
namespace {

TEST(Config, EmptyJsonKeepsDefaults) {
  const AppConfig c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.sim.quad.mass, SimConfig{}.quad.mass);
  EXPECT_EQ(c.ppo.num_envs, PpoConfig{}.num_envs);
}

TEST(Config, RoundTrip) {
  AppConfig c;
  c.sim.quad.mass = 1.3;
  c.sim.actuator.transient.dead_zone = 250.0;
  c.ppo.learning_rate = 1e-4;
  c.itn.rates = 0.6;
  const AppConfig d = config_from_json(config_to_json(c));
  EXPECT_EQ(d.sim.quad.mass, 1.3);
  EXPECT_EQ(d.sim.actuator.transient.dead_zone, 250.0);
  EXPECT_EQ(d.ppo.learning_rate, 1e-4);
  EXPECT_EQ(d.itn.rates, 0.6);
  EXPECT_EQ(config_to_json(d), config_to_json(c));
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"quad": {"mas": 1.0}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"extra": 1})")), ConfigError);
}

TEST(Config, RejectsInvalidValues) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"quad": {"mass": -1.0}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"quad": {"mass": "heavy"}})")), ConfigError);
}

TEST(Config, LoadFileErrors) {
  EXPECT_THROW(load_config(::testing::TempDir() + "does_not_exist.json"), ConfigError);
  const std::string path = ::testing::TempDir() + "broken.json";
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  EXPECT_THROW(load_config(path), ConfigError);
}

}  // namespace
