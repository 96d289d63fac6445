#pragma once

// Optimization of the combined objective: Adam, mini-batch training with
// validation-based model selection, retraining on train+validation, and grid
// search over loss / selection hyperparameters.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mexa/config.hpp"
#include "mexa/dataset.hpp"
#include "mexa/model.hpp"

namespace mexa::train {

using model::ModelParams;
using model::ParamList;

struct AdamOptions {
  double lr = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamOptions from(const RunConfig& c) { return {c.lr, c.beta1, c.beta2, c.adam_eps}; }
};

struct OptimizerState {
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
  std::size_t step = 0;

  static OptimizerState for_params(const ParamList& params);
};

/// One bias-corrected Adam update using each parameter's accumulated gradient.
/// Throws NumericError naming the first parameter with a non-finite gradient.
void adam_step(ParamList& params, OptimizerState& state, const AdamOptions& options);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParamList& params, double max_norm);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct EpochRecord {
  std::size_t epoch = 0;
  double train_total = kNaN;
  double train_cls = kNaN;
  double valid_total = kNaN;
  double valid_cls = kNaN;
  double valid_roc_auc = kNaN;
  double valid_pr_auc = kNaN;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when nothing was trained
  double best_valid_cls = kNaN;
  double best_valid_pr_auc = kNaN;
  std::string best_checkpoint;
  bool early_stopped = false;
  bool retrained = false;
  std::vector<EpochRecord> retrain_epochs;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// Exact-value JSON (doubles round-trip; NaN becomes null).
std::string report_json(const TrainReport& report);

struct FitResult {
  TrainReport report;
  ModelParams params;
};

/// Shuffled mini-batch training. With a validation set, keeps the parameters
/// of the epoch with the lowest validation classification loss and stops
/// after `patience` epochs without improvement; then, when
/// `retrain_combined`, retrains from the same initialization on
/// train+validation for the selected number of epochs. Deterministic given
/// config.seed. Throws NumericError on divergence.
FitResult fit(const data::DatasetManifest& manifest, const std::vector<data::TrialRecord>& train,
              const std::vector<data::TrialRecord>& valid, const RunConfig& config);

struct LossSummary {
  double total = kNaN;
  double cls = kNaN;
  double cauchy = kNaN;
  double contrastive = kNaN;
  std::vector<double> predictions;
  std::vector<int> labels;
};

/// Forward-only pass in batches; losses are sample-weighted means.
LossSummary evaluate(const ModelParams& params, const data::DatasetManifest& manifest,
                     const std::vector<data::TrialRecord>& records, const RunConfig& config,
                     const data::ClassWeights& weights);

std::vector<double> predict(const ModelParams& params, const data::DatasetManifest& manifest,
                            const std::vector<data::TrialRecord>& records, const RunConfig& config);

struct GridCell {
  std::string name;
  RunConfig config;
};

struct GridRow {
  std::string name;
  RunConfig config;
  double valid_cls = kNaN;
  double valid_pr_auc = kNaN;
  double valid_roc_auc = kNaN;
  std::size_t best_epoch = 0;
};

struct GridResult {
  std::vector<GridRow> rows;   // in cell order
  std::vector<std::size_t> ranking;  // indices into rows, best first
  std::size_t best = 0;
};

/// Cartesian product over `axes` (config key -> candidate JSON values),
/// applied on top of `base` in key order.
std::vector<GridCell> expand_grid(const RunConfig& base, const nlohmann::json& axes);

/// Trains every cell (without the retrain phase) and ranks by validation
/// classification loss, then higher validation PR-AUC, then cell order.
/// Throws ConfigError on an empty grid.
GridResult grid_search(const std::vector<GridCell>& cells, const data::DatasetManifest& manifest,
                       const std::vector<data::TrialRecord>& train, const std::vector<data::TrialRecord>& valid);

/// Token-usage table of the selection masks over `records` (forward only).
std::vector<model::TokenUsageRow> token_usage(const ModelParams& params, const data::DatasetManifest& manifest,
                                              const std::vector<data::TrialRecord>& records,
                                              const RunConfig& config);

// ---- protocol ------------------------------------------------------------

/// Temporal split per the config: `split_date` when set, otherwise the date
/// leaving roughly `test_fraction` of records in the test set.
data::Splits protocol_split(const std::vector<data::TrialRecord>& records, const RunConfig& config);

struct ProtocolResult {
  data::Splits splits;
  FitResult fit;
  LossSummary test;  // predictions of the final parameters on the test split
  double test_roc_auc = kNaN;
  double test_pr_auc = kNaN;
  double test_f1 = kNaN;
};

/// split -> fit -> score the test split. Metrics stay NaN when the test split
/// is empty or single-class.
ProtocolResult run_protocol(const data::Dataset& dataset, const RunConfig& config);

/// Runs `run_protocol` for every config on up to `jobs` threads. Results are
/// in input order and independent of `jobs`.
std::vector<ProtocolResult> run_protocols(const data::Dataset& dataset, const std::vector<RunConfig>& configs,
                                          std::size_t jobs = 1);

// ---- checkpoints ---------------------------------------------------------

struct Checkpoint {
  RunConfig config;
  model::InputDims dims;
  std::string rng_state;
  ModelParams params;
};

/// Versioned little-endian binary: magic, version, config hash, config JSON,
/// input dims, RNG state, then every parameter (name, shape, raw doubles).
void save_checkpoint(const std::string& path, const ModelParams& params, const RunConfig& config,
                     const std::string& rng_state = {});
Checkpoint load_checkpoint(const std::string& path);
/// FNV-1a 64 of the file bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

}  // namespace mexa::train
