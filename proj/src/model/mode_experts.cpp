#include "mexa/mode_experts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mexa/errors.hpp"

namespace mexa::model {

ExpertParams ExpertParams::create(const std::string& name, std::size_t d_model, Rng& rng, bool equalized) {
  return {xavier(name + ".w_p", d_model, 1, rng, equalized),
          xavier(name + ".w_q", d_model, d_model, rng, equalized),
          xavier(name + ".w_k", d_model, d_model, rng, equalized),
          xavier(name + ".w_v", d_model, d_model, rng, equalized), equalized};
}

void ExpertParams::collect(ParamList& out) const { out.insert(out.end(), {w_p, w_q, w_k, w_v}); }

SelectionResult select_tokens(const Tensor& s, const Mask& valid, const Tensor& w_p,
                              const SelectionOptions& options) {
  if (s.shape().size() != 3 || valid.shape != Shape{s.dim(0), s.dim(1)}) {
    throw DimensionError("select_tokens: tokens " + shape_string(s.shape()) + " vs mask " +
                         shape_string(valid.shape));
  }
  const std::size_t batch = s.dim(0), len = s.dim(1);
  SelectionResult r;
  r.valid = valid;
  r.p = ad::sigmoid(ad::reshape(ad::linear(s, w_p, Tensor{}), {batch, len}));

  r.hard = Mask({batch, len}, false);
  const auto p = r.p.value().data();
  for (std::size_t i = 0; i < r.hard.size(); ++i) {
    if (!valid[i]) continue;
    const bool keep = options.direction == IndicatorDirection::kKeepHigh ? p[i] >= options.threshold
                                                                         : p[i] <= options.threshold;
    r.hard.bits[i] = (options.variant == TokenSelection::kAll || keep) ? 1 : 0;
  }
  if (options.variant == TokenSelection::kRandom) {
    if (options.rng == nullptr) throw ConfigError("random token selection needs an RNG");
    std::vector<std::size_t> candidates;
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t kept = 0;
      candidates.clear();
      for (std::size_t l = 0; l < len; ++l) {
        kept += r.hard.bits[b * len + l];
        r.hard.bits[b * len + l] = 0;
        if (valid[b * len + l]) candidates.push_back(l);
      }
      std::shuffle(candidates.begin(), candidates.end(), *options.rng);
      for (std::size_t i = 0; i < kept; ++i) r.hard.bits[b * len + candidates[i]] = 1;
    }
  }
  const Tensor gate = ad::mul(r.p, Tensor::constant(r.hard.as_array()));
  r.targets = ad::mul_rows(s, gate);
  return r;
}

Tensor cross_attend(const SelectionResult& source, const Tensor& destination,
                    const Mask& destination_mask, const ExpertParams& dst, const std::string& label) {
  const Tensor& t = source.targets;
  if (t.shape().size() != 3 || destination.shape().size() != 3 || t.dim(0) != destination.dim(0) ||
      t.dim(2) != destination.dim(2)) {
    throw DimensionError(label + ": query tokens " + shape_string(t.shape()) + " vs destination " +
                         shape_string(destination.shape()));
  }
  const std::size_t batch = t.dim(0), lq = t.dim(1), lk = destination.dim(1), d = t.dim(2);
  Mask keys({batch, lq, lk}, false);
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < lk; ++j) any = any || destination_mask[b * lk + j];
    if (!any) {
      throw DegenerateMaskError(label + ": batch entry " + std::to_string(b) +
                                " has no valid destination tokens");
    }
    for (std::size_t i = 0; i < lq; ++i) {
      std::copy_n(destination_mask.bits.begin() + b * lk, lk, keys.bits.begin() + (b * lq + i) * lk);
    }
  }
  const Tensor q = dense(t, dst.w_q, Tensor{}, dst.equalized);
  const Tensor k = dense(destination, dst.w_k, Tensor{}, dst.equalized);
  const Tensor v = dense(destination, dst.w_v, Tensor{}, dst.equalized);
  const Tensor scores = ad::scale(ad::bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(d)));
  const Tensor attn = ad::softmax_rows(scores, &keys, kernels::EmptyRow::kError);
  return ad::mask_rows(ad::bmm(attn, v), source.hard);
}

Mode pair_source(Pair p) {
  switch (p) {
    case Pair::kMD:
    case Pair::kMC:
      return Mode::kMolecule;
    case Pair::kDM:
    case Pair::kDC:
      return Mode::kDisease;
    case Pair::kCD:
    case Pair::kCM:
      return Mode::kCriteria;
  }
  return Mode::kMolecule;
}

Mode pair_destination(Pair p) {
  switch (p) {
    case Pair::kDM:
    case Pair::kCM:
      return Mode::kMolecule;
    case Pair::kMD:
    case Pair::kCD:
      return Mode::kDisease;
    case Pair::kMC:
    case Pair::kDC:
      return Mode::kCriteria;
  }
  return Mode::kMolecule;
}

std::string pair_name(Pair p) {
  static const char* names[] = {"I_md", "I_dm", "I_cd", "I_dc", "I_mc", "I_cm"};
  return names[static_cast<std::size_t>(p)];
}

ExpertOutputs run_experts(const EnrichedModes& enriched, const ExpertBank& experts,
                          const SelectionOptions& options) {
  const std::array<const Tensor*, kModeCount> tokens{&enriched.molecules, &enriched.diseases,
                                                     &enriched.criteria.combined};
  const std::array<const Mask*, kModeCount> masks{&enriched.molecule_mask, &enriched.disease_mask,
                                                  &enriched.criteria.combined_mask};
  ExpertOutputs out;
  for (std::size_t m = 0; m < kModeCount; ++m) {
    const Tensor w_p = effective(experts[m].w_p, experts[m].equalized);
    out.selections[m] = select_tokens(*tokens[m], *masks[m], w_p, options);
  }
  for (std::size_t i = 0; i < kPairCount; ++i) {
    const auto pair = static_cast<Pair>(i);
    const auto src = static_cast<std::size_t>(pair_source(pair));
    const auto dst = static_cast<std::size_t>(pair_destination(pair));
    Interaction& it = out.interactions.items[i];
    it.value = cross_attend(out.selections[src], *tokens[dst], *masks[dst], experts[dst], pair_name(pair));
    it.valid = *masks[src];
    it.selected = out.selections[src].hard;
  }
  return out;
}

void TokenUsageCounter::add(const std::string& mode, const Mask& valid, const Mask& hard,
                            std::size_t offset, std::size_t length) {
  const std::size_t batch = valid.shape[0], width = valid.shape[1];
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t x = 0;
    for (std::size_t l = 0; l < length; ++l) x += valid[b * width + offset + l];
    if (x == 0) continue;
    for (std::size_t l = 0; l < length; ++l) {
      if (!valid[b * width + offset + l]) continue;
      Cell& c = cells_[{mode, x, l}];
      ++c.samples;
      c.selected += hard[b * width + offset + l];
    }
  }
}

void TokenUsageCounter::add(const ExpertOutputs& outputs) {
  const auto& mol = outputs.selections[static_cast<std::size_t>(Mode::kMolecule)];
  const auto& dis = outputs.selections[static_cast<std::size_t>(Mode::kDisease)];
  const auto& cri = outputs.selections[static_cast<std::size_t>(Mode::kCriteria)];
  add("molecule", mol.valid, mol.hard, 0, mol.valid.shape[1]);
  add("disease", dis.valid, dis.hard, 0, dis.valid.shape[1]);
  add("inclusion", cri.valid, cri.hard, 0, inclusion_cap_);
  add("exclusion", cri.valid, cri.hard, inclusion_cap_, cri.valid.shape[1] - inclusion_cap_);
  trials_ += mol.valid.shape[0];
}

std::vector<TokenUsageRow> TokenUsageCounter::table() const {
  std::vector<TokenUsageRow> rows;
  rows.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) {
    const auto& [mode, x, index] = key;
    rows.push_back({mode, x, index, cell.selected, cell.samples,
                    static_cast<double>(cell.selected) / static_cast<double>(cell.samples), x == 1});
  }
  return rows;
}

}  // namespace mexa::model
