#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "mexa/dataset.hpp"

namespace mexa {

enum class TokenSelection : std::uint8_t { kLearned, kAll, kRandom };
/// kKeepHigh keeps tokens with p >= t; kLiteral keeps p <= t (printed indicator).
enum class IndicatorDirection : std::uint8_t { kKeepHigh, kLiteral };
enum class ContrastiveDenominator : std::uint8_t { kGlobal, kPerAnchor };
/// Residual layout of every encoder layer (see encoder_bank.hpp).
enum class NormPlacement : std::uint8_t { kPre, kPost };

/// Every hyperparameter of a run. Serialized as a flat JSON object; unknown
/// keys are rejected.
struct RunConfig {
  // Architecture.
  data::Caps caps;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ffn = 32;
  std::size_t head_blocks = 1;
  NormPlacement norm_placement = NormPlacement::kPre;
  bool equalized_lr = true;  // weights used as W/√fan_in (see model::dense)

  // Optimization.
  double lr = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  double grad_clip = 5.0;  // global-norm clip; 0 disables

  // Objective and token selection.
  double lambda_cauchy = 0.05;
  double lambda_contrastive = 0.04;
  double threshold = 0.5;
  double cauchy_eps = 0.1;
  double tau = 0.5;
  bool swap_class_weights = false;
  ContrastiveDenominator contrastive_denominator = ContrastiveDenominator::kGlobal;
  TokenSelection token_selection = TokenSelection::kLearned;
  IndicatorDirection indicator_direction = IndicatorDirection::kLiteral;

  // Inputs.
  data::Aggregation aggregation = data::Aggregation::kFirstToken;
  bool use_pe = true;

  // Protocol.
  std::string split_date;  // YYYY-MM-DD; empty = latest 20% of start dates
  double test_fraction = 0.2;
  double validation_fraction = 0.15;
  bool retrain_combined = true;
  std::size_t bootstrap_reps = 10;
  double bootstrap_fraction = 0.8;
  bool bootstrap_with_replacement = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a value is out of range.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Starts from `base` and overrides every key present in `j`.
RunConfig from_json(const nlohmann::json& j, const RunConfig& base = {});
/// Applies `key=value` (value parsed as JSON, falling back to a string).
void apply_override(RunConfig& c, const std::string& assignment);

/// Stable 64-bit FNV-1a hash of the canonical JSON serialization.
std::uint64_t config_hash(const RunConfig& c);
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string to_string(TokenSelection s);
std::string to_string(IndicatorDirection d);
std::string to_string(ContrastiveDenominator d);
std::string to_string(NormPlacement n);

}  // namespace mexa
