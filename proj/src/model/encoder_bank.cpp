#include "mexa/encoder_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mexa/errors.hpp"

namespace mexa::model {
namespace {

// Key-validity mask broadcast over query rows: out[b, i, j] = mask[b, j].
Mask key_mask(const Mask& mask, std::size_t queries) {
  const std::size_t batch = mask.shape[0], keys = mask.shape[1];
  Mask out({batch, queries, keys}, false);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < queries; ++i) {
      std::copy_n(mask.bits.begin() + b * keys, keys, out.bits.begin() + (b * queries + i) * keys);
    }
  }
  return out;
}

// Key order per batch entry: valid tokens sorted by their row values, then
// padding. Reducing over keys in an order fixed by content (not position)
// makes every query's sums independent of how the input set is permuted.
std::vector<std::size_t> canonical_key_order(const Array& x, const Mask& mask) {
  const std::size_t batch = x.dim(0), len = x.dim(1), d = x.dim(2);
  std::vector<std::size_t> order(batch * len);
  for (std::size_t b = 0; b < batch; ++b) {
    auto first = order.begin() + static_cast<std::ptrdiff_t>(b * len);
    std::iota(first, first + static_cast<std::ptrdiff_t>(len), std::size_t{0});
    const double* base = x.data().data() + b * len * d;
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(len), [&](std::size_t i, std::size_t j) {
      const bool vi = mask[b * len + i], vj = mask[b * len + j];
      if (vi != vj) return vi;
      if (!vi) return false;
      return std::lexicographical_compare(base + i * d, base + (i + 1) * d, base + j * d, base + (j + 1) * d);
    });
  }
  return order;
}

Mask permute_mask(const Mask& mask, const std::vector<std::size_t>& order) {
  const std::size_t len = mask.shape[1];
  Mask out(mask.shape, false);
  for (std::size_t r = 0; r < order.size(); ++r) out.bits[r] = mask.bits[(r / len) * len + order[r]];
  return out;
}

}  // namespace

EncoderStack EncoderStack::create(const std::string& name, const EncoderShape& shape, Rng& rng) {
  if (shape.heads == 0 || shape.d_model % shape.heads != 0) {
    throw ConfigError(name + ": d_model must be a multiple of the head count");
  }
  EncoderStack s;
  s.shape = shape;
  const std::size_t d = shape.d_model, dh = d / shape.heads;
  const bool eq = shape.equalized;
  if (shape.input_dim > 0) {
    s.w_in = xavier(name + ".in.w", shape.input_dim, d, rng, eq);
    s.b_in = zeros(name + ".in.b", {d});
  }
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::string p = name + ".layer" + std::to_string(l);
    EncoderLayer layer;
    layer.equalized = eq;
    for (std::size_t h = 0; h < shape.heads; ++h) {
      const std::string hp = p + ".head" + std::to_string(h);
      layer.heads.push_back({xavier(hp + ".wq", d, dh, rng, eq), zeros(hp + ".bq", {dh}),
                             xavier(hp + ".wk", d, dh, rng, eq), zeros(hp + ".bk", {dh}),
                             xavier(hp + ".wv", d, dh, rng, eq), zeros(hp + ".bv", {dh})});
    }
    layer.wo = xavier(p + ".wo", d, d, rng, eq);
    layer.bo = zeros(p + ".bo", {d});
    layer.ln1_gain = ones(p + ".ln1.gain", {d});
    layer.ln1_bias = zeros(p + ".ln1.bias", {d});
    layer.w1 = xavier(p + ".ffn.w1", d, shape.ffn, rng, eq);
    layer.b1 = zeros(p + ".ffn.b1", {shape.ffn});
    layer.w2 = xavier(p + ".ffn.w2", shape.ffn, d, rng, eq);
    layer.b2 = zeros(p + ".ffn.b2", {d});
    layer.ln2_gain = ones(p + ".ln2.gain", {d});
    layer.ln2_bias = zeros(p + ".ln2.bias", {d});
    s.layers.push_back(std::move(layer));
  }
  if (shape.norm == NormPlacement::kPre) {
    s.final_gain = ones(name + ".final_ln.gain", {d});
    s.final_bias = zeros(name + ".final_ln.bias", {d});
  }
  return s;
}

void EncoderStack::collect(ParamList& out) const {
  if (w_in.defined()) {
    out.push_back(w_in);
    out.push_back(b_in);
  }
  for (const auto& l : layers) {
    for (const auto& h : l.heads) {
      out.insert(out.end(), {h.wq, h.bq, h.wk, h.bk, h.wv, h.bv});
    }
    out.insert(out.end(), {l.wo, l.bo, l.ln1_gain, l.ln1_bias, l.w1, l.b1, l.w2, l.b2,
                           l.ln2_gain, l.ln2_bias});
  }
  if (final_gain.defined()) out.insert(out.end(), {final_gain, final_bias});
}

void EncoderBank::collect(ParamList& out) const {
  molecule.collect(out);
  disease.collect(out);
  criteria.collect(out);
}

Array sinusoidal_pe(std::size_t length, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("sinusoidal_pe: dimension must be even, got " + std::to_string(dim));
  Array pe({length, dim});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Tensor self_attention(const EncoderLayer& layer, const Tensor& x, const Mask& mask) {
  const std::size_t len = x.dim(1);
  const std::size_t dh = layer.heads.front().wq.dim(1);
  const std::vector<std::size_t> order = canonical_key_order(x.value(), mask);
  const Tensor xk = ad::gather_rows(x, order);
  const Mask keys = key_mask(permute_mask(mask, order), len);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outputs;
  outputs.reserve(layer.heads.size());
  for (const auto& h : layer.heads) {
    const Tensor q = dense(x, h.wq, h.bq, layer.equalized);
    const Tensor k = dense(xk, h.wk, h.bk, layer.equalized);
    const Tensor v = dense(xk, h.wv, h.bv, layer.equalized);
    const Tensor scores = ad::scale(ad::bmm(q, k, true), inv_scale);
    const Tensor attn = ad::softmax_rows(scores, &keys, kernels::EmptyRow::kZero);
    outputs.push_back(ad::bmm(attn, v));
  }
  const Tensor joined = outputs.size() == 1 ? outputs.front() : ad::concat(outputs, 2);
  return dense(joined, layer.wo, layer.bo, layer.equalized);
}

Tensor encode(const EncoderStack& stack, const Tensor& u, const Mask& mask, bool use_pe) {
  if (u.shape().size() != 3 || mask.shape != Shape{u.dim(0), u.dim(1)}) {
    throw DimensionError("encode: input " + shape_string(u.shape()) + " vs mask " + shape_string(mask.shape));
  }
  const std::size_t expected_in = stack.shape.input_dim > 0 ? stack.shape.input_dim : stack.shape.d_model;
  if (u.dim(2) != expected_in) {
    throw DimensionError("encode: input feature size " + std::to_string(u.dim(2)) + ", encoder expects " +
                         std::to_string(expected_in));
  }
  Tensor h = stack.w_in.defined() ? dense(u, stack.w_in, stack.b_in, stack.shape.equalized) : u;
  if (use_pe) {
    const std::size_t batch = u.dim(0), len = u.dim(1), d = stack.shape.d_model;
    const Array pe = sinusoidal_pe(len, d);
    Array tiled({batch, len, d});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t l = 0; l < len; ++l) {
        if (!mask[b * len + l]) continue;
        std::copy_n(pe.data().begin() + l * d, d, tiled.data().begin() + (b * len + l) * d);
      }
    }
    h = ad::add(h, Tensor::constant(std::move(tiled)));
  }
  auto ffn = [](const EncoderLayer& layer, const Tensor& x) {
    const Tensor hidden = ad::relu(dense(x, layer.w1, layer.b1, layer.equalized));
    return dense(hidden, layer.w2, layer.b2, layer.equalized);
  };
  if (stack.shape.norm == NormPlacement::kPost) {
    for (const auto& layer : stack.layers) {
      h = ad::layer_norm(ad::add(h, self_attention(layer, h, mask)), layer.ln1_gain, layer.ln1_bias);
      h = ad::layer_norm(ad::add(h, ffn(layer, h)), layer.ln2_gain, layer.ln2_bias);
    }
  } else {
    for (const auto& layer : stack.layers) {
      h = ad::add(h, self_attention(layer, ad::layer_norm(h, layer.ln1_gain, layer.ln1_bias), mask));
      h = ad::add(h, ffn(layer, ad::layer_norm(h, layer.ln2_gain, layer.ln2_bias)));
    }
    h = ad::layer_norm(h, stack.final_gain, stack.final_bias);
  }
  return ad::mask_rows(h, mask);
}

Mask concat_masks(const Mask& a, const Mask& b) {
  const std::size_t batch = a.shape[0], la = a.shape[1], lb = b.shape[1];
  if (b.shape[0] != batch) throw DimensionError("concat_masks: batch sizes differ");
  Mask out({batch, la + lb}, false);
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(a.bits.begin() + i * la, la, out.bits.begin() + i * (la + lb));
    std::copy_n(b.bits.begin() + i * lb, lb, out.bits.begin() + i * (la + lb) + la);
  }
  return out;
}

CriteriaEncoding encode_criteria(const EncoderStack& stack, const Tensor& inclusion,
                                 const Tensor& exclusion, const Mask& inclusion_mask,
                                 const Mask& exclusion_mask, bool use_pe) {
  CriteriaEncoding out;
  out.inclusion = encode(stack, inclusion, inclusion_mask, use_pe);
  out.exclusion = encode(stack, exclusion, exclusion_mask, use_pe);
  out.combined = ad::concat({out.inclusion, out.exclusion}, 1);
  out.combined_mask = concat_masks(inclusion_mask, exclusion_mask);
  return out;
}

}  // namespace mexa::model
