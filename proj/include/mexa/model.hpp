#pragma once

#include <vector>

#include "mexa/compensation_head.hpp"
#include "mexa/config.hpp"
#include "mexa/dataset.hpp"
#include "mexa/encoder_bank.hpp"
#include "mexa/losses.hpp"
#include "mexa/mode_experts.hpp"

namespace mexa::model {

struct InputDims {
  std::size_t d_mol = 0;
  std::size_t d_dis = 0;
  std::size_t d_txt = 0;

  static InputDims from(const data::DatasetManifest& m) { return {m.d_mol, m.d_dis, m.d_txt}; }
  bool operator==(const InputDims&) const = default;
};

/// Every learned tensor of the network.
struct ModelParams {
  InputDims dims;
  EncoderBank encoders;
  ExpertBank experts;
  FusionParams fusion;

  /// Deterministic initialization from `config.seed` and the model shape.
  static ModelParams create(const InputDims& dims, const RunConfig& config);

  /// All parameters in a fixed order; names are unique.
  ParamList parameters() const;
  std::size_t parameter_count() const;
  /// Deep copy of the current values into fresh leaves.
  ModelParams clone() const;
  void copy_values_from(const ModelParams& other);
};

struct ForwardResult {
  Prediction prediction;
  Tensor cls;          // scalar batch-mean wBCE
  Tensor cauchy;       // scalar batch-mean Cauchy penalty
  Tensor contrastive;  // scalar batch-mean contrastive loss
  Tensor total;
  ExpertOutputs experts;
};

/// Runs the four stages on a padded batch and evaluates the combined
/// objective. `selection_rng` feeds the random token-selection variant.
ForwardResult forward(const ModelParams& params, const data::PaddedBatch& batch, const RunConfig& config,
                      const data::ClassWeights& weights, Rng& selection_rng);

/// Encoder stage only (exposed for inspection and tests).
EnrichedModes enrich(const ModelParams& params, const data::PaddedBatch& batch, const RunConfig& config);

}  // namespace mexa::model
