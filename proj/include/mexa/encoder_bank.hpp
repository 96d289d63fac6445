#pragma once

// Knowledge-embedding stage: per-mode transformer encoders and the shared
// (siamese) criteria encoder with sinusoidal statement positions.

#include <cstdint>
#include <string>
#include <vector>

#include "mexa/config.hpp"
#include "mexa/params.hpp"

namespace mexa::model {

struct AttentionHead {
  Tensor wq, bq, wk, bk, wv, bv;
};

/// Layer layout by NormPlacement:
///   kPost: x = LN(x + MHA(x)); x = LN(x + FFN(x))
///   kPre:  x = x + MHA(LN(x)); x = x + FFN(LN(x)); a final LN closes the stack
struct EncoderLayer {
  std::vector<AttentionHead> heads;
  Tensor wo, bo;
  Tensor ln1_gain, ln1_bias;
  Tensor w1, b1, w2, b2;
  Tensor ln2_gain, ln2_bias;
  bool equalized = false;
};

struct EncoderShape {
  std::size_t input_dim = 0;  // 0 = no input projection (input already d_model)
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ffn = 32;
  NormPlacement norm = NormPlacement::kPre;
  bool equalized = false;  // see dense()
};

struct EncoderStack {
  EncoderShape shape;
  Tensor w_in, b_in;  // undefined without an input projection
  std::vector<EncoderLayer> layers;
  Tensor final_gain, final_bias;  // pre-norm only

  static EncoderStack create(const std::string& name, const EncoderShape& shape, Rng& rng);
  void collect(ParamList& out) const;
};

/// PE[pos, 2i] = sin(pos / 10000^(2i/dim)), PE[pos, 2i+1] = cos(same). Throws
/// ConfigError for odd `dim`.
Array sinusoidal_pe(std::size_t length, std::size_t dim);

/// Masked multi-head self-attention over x[B×L×d]; padded keys are ignored.
Tensor self_attention(const EncoderLayer& layer, const Tensor& x, const Mask& mask);

/// Runs the stack over u[B×L×input_dim]. Self-attention only sees valid
/// tokens and padded output rows are zero. With `use_pe`, sinusoidal
/// positions (by index within the list) are added to valid rows after the
/// input projection. A batch entry with no valid tokens yields zero rows.
Tensor encode(const EncoderStack& stack, const Tensor& u, const Mask& mask, bool use_pe = false);

/// Molecule / disease encoders: sets, so no positional signal.
inline Tensor encode_mode(const EncoderStack& stack, const Tensor& u, const Mask& mask) {
  return encode(stack, u, mask, false);
}

struct CriteriaEncoding {
  Tensor inclusion;  // [B×cap_inc×d]
  Tensor exclusion;  // [B×cap_exc×d]
  Tensor combined;   // inclusion ‖ exclusion along the sequence axis
  Mask combined_mask;
};

/// Applies one shared stack to inclusion and exclusion statements separately
/// and concatenates the results.
CriteriaEncoding encode_criteria(const EncoderStack& stack, const Tensor& inclusion,
                                 const Tensor& exclusion, const Mask& inclusion_mask,
                                 const Mask& exclusion_mask, bool use_pe);

struct EncoderBank {
  EncoderStack molecule;
  EncoderStack disease;
  EncoderStack criteria;

  void collect(ParamList& out) const;
};

struct EnrichedModes {
  Tensor molecules;
  Tensor diseases;
  CriteriaEncoding criteria;
  Mask molecule_mask;
  Mask disease_mask;
};

/// Concatenate two [B×L] masks along the sequence axis.
Mask concat_masks(const Mask& a, const Mask& b);

}  // namespace mexa::model
