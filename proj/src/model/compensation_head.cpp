#include "mexa/compensation_head.hpp"

#include "mexa/errors.hpp"

namespace mexa::model {

FusionParams FusionParams::create(const EncoderShape& shape, std::size_t head_blocks, Rng& rng) {
  EncoderShape s = shape;
  s.input_dim = 0;
  FusionParams f;
  f.equalized = s.equalized;
  f.encoder = EncoderStack::create("fusion", s, rng);
  for (std::size_t i = 0; i < head_blocks; ++i) {
    const std::string p = "head.block" + std::to_string(i);
    f.blocks.push_back({xavier(p + ".w1", s.d_model, s.ffn, rng, s.equalized), zeros(p + ".b1", {s.ffn}),
                        xavier(p + ".w2", s.ffn, s.d_model, rng, s.equalized), zeros(p + ".b2", {s.d_model})});
  }
  f.w_out = xavier("head.out.w", s.d_model, 1, rng, s.equalized);
  f.b_out = zeros("head.out.b", {1});
  return f;
}

void FusionParams::collect(ParamList& out) const {
  encoder.collect(out);
  for (const auto& b : blocks) out.insert(out.end(), {b.w1, b.b1, b.w2, b.b2});
  out.insert(out.end(), {w_out, b_out});
}

FusedSequence concat_interactions(const InteractionSet& interactions) {
  FusedSequence f;
  std::vector<Tensor> parts;
  for (const auto& it : interactions.items) {
    parts.push_back(it.value);
    f.mask = f.mask.bits.empty() ? it.valid : concat_masks(f.mask, it.valid);
  }
  f.tokens = ad::concat(parts, 1);
  return f;
}

Prediction fuse_and_predict(const InteractionSet& interactions, const FusionParams& params) {
  const FusedSequence seq = concat_interactions(interactions);
  const std::size_t batch = seq.tokens.dim(0), len = seq.tokens.dim(1);
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t l = 0; l < len; ++l) any = any || seq.mask[b * len + l];
    if (!any) throw DegenerateMaskError("fuse_and_predict: trial " + std::to_string(b) + " has no valid tokens");
  }
  const Tensor encoded = encode(params.encoder, seq.tokens, seq.mask, false);
  Tensor h = ad::masked_mean(encoded, seq.mask);
  for (const auto& blk : params.blocks) {
    const Tensor hidden = ad::relu(dense(h, blk.w1, blk.b1, params.equalized));
    const Tensor inner = dense(hidden, blk.w2, blk.b2, params.equalized);
    h = ad::add(h, inner);
  }
  Prediction p;
  p.logit = ad::reshape(dense(h, params.w_out, params.b_out, params.equalized), {batch});
  p.y_hat = ad::sigmoid(p.logit);
  return p;
}

}  // namespace mexa::model
