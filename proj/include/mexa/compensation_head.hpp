#pragma once

// Knowledge compensation: fuse the six interactions with a self-attention
// encoder, average over the sequence and predict success probability.

#include <vector>

#include "mexa/encoder_bank.hpp"
#include "mexa/mode_experts.hpp"

namespace mexa::model {

/// h + W2·relu(W1·h + b1) + b2
struct ResidualBlock {
  Tensor w1, b1, w2, b2;
};

struct FusionParams {
  EncoderStack encoder;
  std::vector<ResidualBlock> blocks;
  Tensor w_out, b_out;
  bool equalized = false;

  static FusionParams create(const EncoderShape& shape, std::size_t head_blocks, Rng& rng);
  void collect(ParamList& out) const;
};

struct FusedSequence {
  Tensor tokens;  // [B×ΣL×d] in pair order md, dm, cd, dc, mc, cm
  Mask mask;      // source-token validity
};

FusedSequence concat_interactions(const InteractionSet& interactions);

struct Prediction {
  Tensor logit;  // [B]
  Tensor y_hat;  // [B], sigmoid(logit)
};

/// concat -> self-attention encoder -> masked mean -> residual head -> sigmoid.
/// Throws DegenerateMaskError when a trial has no valid interaction row.
Prediction fuse_and_predict(const InteractionSet& interactions, const FusionParams& params);

}  // namespace mexa::model
