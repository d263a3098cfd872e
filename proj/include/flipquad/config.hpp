#pragma once

// JSON configuration for the vehicle, simulation and training. Every key is
// optional; missing keys keep the built-in defaults and unknown keys are
// rejected.

#include <string>

#include <nlohmann/json.hpp>

#include "flipquad/flight_stack.hpp"
#include "flipquad/ppo.hpp"

namespace flipquad {

struct AppConfig {
  SimConfig sim;
  PpoConfig ppo;
  RewardWeights nti = RewardWeights::nti();
  RewardWeights itn = RewardWeights::itn();

  const RewardWeights& weights(Transition t) const { return t == Transition::NTI ? nti : itn; }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AppConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AppConfig& c);

/// Reads and validates a config file. Throws ConfigError.
AppConfig load_config(const std::string& path);

}  // namespace flipquad
