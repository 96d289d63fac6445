#include "mexa/model.hpp"

#include <unordered_map>

#include "mexa/errors.hpp"

namespace mexa::model {

ModelParams ModelParams::create(const InputDims& dims, const RunConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, Stream::kInit);
  const EncoderShape base{0, config.d_model, config.heads, config.layers, config.ffn,
                           config.norm_placement, config.equalized_lr};
  auto with_input = [&](std::size_t in) {
    EncoderShape s = base;
    s.input_dim = in;
    return s;
  };
  ModelParams p;
  p.dims = dims;
  p.encoders.molecule = EncoderStack::create("enc.molecule", with_input(dims.d_mol), rng);
  p.encoders.disease = EncoderStack::create("enc.disease", with_input(dims.d_dis), rng);
  p.encoders.criteria = EncoderStack::create("enc.criteria", with_input(dims.d_txt), rng);
  p.experts[0] = ExpertParams::create("expert.molecule", config.d_model, rng, config.equalized_lr);
  p.experts[1] = ExpertParams::create("expert.disease", config.d_model, rng, config.equalized_lr);
  p.experts[2] = ExpertParams::create("expert.criteria", config.d_model, rng, config.equalized_lr);
  p.fusion = FusionParams::create(base, config.head_blocks, rng);
  return p;
}

ParamList ModelParams::parameters() const {
  ParamList out;
  encoders.collect(out);
  for (const auto& e : experts) e.collect(out);
  fusion.collect(out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;
  // The struct copy shares nodes; rebuild every leaf with its own storage.
  ParamList src = parameters();
  std::unordered_map<const ad::Node*, Tensor> fresh;
  for (const auto& t : src) fresh.emplace(t.node().get(), Tensor::parameter(t.value(), t.name()));
  auto remap = [&](Tensor& t) {
    if (t.defined()) t = fresh.at(t.node().get());
  };
  auto remap_stack = [&](EncoderStack& s) {
    remap(s.w_in);
    remap(s.b_in);
    for (auto& l : s.layers) {
      for (auto& h : l.heads) {
        for (Tensor* t : {&h.wq, &h.bq, &h.wk, &h.bk, &h.wv, &h.bv}) remap(*t);
      }
      for (Tensor* t : {&l.wo, &l.bo, &l.ln1_gain, &l.ln1_bias, &l.w1, &l.b1, &l.w2, &l.b2, &l.ln2_gain,
                        &l.ln2_bias}) {
        remap(*t);
      }
    }
  };
  remap_stack(copy.encoders.molecule);
  remap_stack(copy.encoders.disease);
  remap_stack(copy.encoders.criteria);
  for (auto& e : copy.experts) {
    for (Tensor* t : {&e.w_p, &e.w_q, &e.w_k, &e.w_v}) remap(*t);
  }
  remap_stack(copy.fusion.encoder);
  for (auto& b : copy.fusion.blocks) {
    for (Tensor* t : {&b.w1, &b.b1, &b.w2, &b.b2}) remap(*t);
  }
  remap(copy.fusion.w_out);
  remap(copy.fusion.b_out);
  return copy;
}

void ModelParams::copy_values_from(const ModelParams& other) {
  ParamList dst = parameters();
  const ParamList src = other.parameters();
  if (dst.size() != src.size()) throw DimensionError("copy_values_from: parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].shape() != src[i].shape()) {
      throw DimensionError("copy_values_from: " + dst[i].name() + " shape " + shape_string(dst[i].shape()) +
                           " vs " + shape_string(src[i].shape()));
    }
    dst[i].mutable_value() = src[i].value();
  }
}

EnrichedModes enrich(const ModelParams& params, const data::PaddedBatch& batch, const RunConfig& config) {
  EnrichedModes e;
  e.molecule_mask = batch.molecule_mask;
  e.disease_mask = batch.disease_mask;
  e.molecules = encode_mode(params.encoders.molecule, Tensor::constant(batch.molecules), batch.molecule_mask);
  e.diseases = encode_mode(params.encoders.disease, Tensor::constant(batch.diseases), batch.disease_mask);
  e.criteria = encode_criteria(params.encoders.criteria, Tensor::constant(batch.inclusion),
                               Tensor::constant(batch.exclusion), batch.inclusion_mask, batch.exclusion_mask,
                               config.use_pe);
  return e;
}

ForwardResult forward(const ModelParams& params, const data::PaddedBatch& batch, const RunConfig& config,
                      const data::ClassWeights& weights, Rng& selection_rng) {
  if (batch.size() == 0) throw DataError("forward: empty batch");
  const EnrichedModes enriched = enrich(params, batch, config);
  SelectionOptions sel{config.threshold, config.token_selection, config.indicator_direction, &selection_rng};

  ForwardResult r;
  r.experts = run_experts(enriched, params.experts, sel);
  r.prediction = fuse_and_predict(r.experts.interactions, params.fusion);
  r.cls = ad::mean(loss::wbce_loss(r.prediction.y_hat, batch.labels, weights, config.swap_class_weights));

  Tensor cauchy;
  for (const auto& s : r.experts.selections) {
    const Tensor term = loss::cauchy_loss(s.p, s.valid, config.cauchy_eps);
    cauchy = cauchy.defined() ? ad::add(cauchy, term) : term;
  }
  r.cauchy = ad::mean(cauchy);
  r.contrastive = ad::mean(loss::contrastive_loss(r.experts.interactions, config.tau, config.contrastive_denominator));
  r.total = loss::total_loss(r.cls, r.cauchy, r.contrastive, config.lambda_cauchy, config.lambda_contrastive);
  return r;
}

}  // namespace mexa::model
