#include "mexa/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mexa/errors.hpp"

namespace mexa::loss {
namespace {

constexpr double kZeroNorm = 1e-12;

}  // namespace

Tensor cauchy_loss(const Tensor& p, const Mask& valid, double eps) {
  if (!(eps > 0)) throw ConfigError("cauchy_loss: eps must be positive");
  if (p.shape().size() != 2 || valid.shape != p.shape()) {
    throw DimensionError("cauchy_loss: p" + shape_string(p.shape()) + " mask" + shape_string(valid.shape));
  }
  const std::size_t batch = p.dim(0), len = p.dim(1);
  Array out({batch});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < len; ++l) {
      if (!valid[b * len + l]) continue;
      const double v = p.value()[b * len + l];
      out[b] += std::log1p(v * v / eps);
    }
  }
  return ad::make_result(std::move(out), {p}, [batch, len, eps, valid](ad::Node& self) {
    ad::Node& pp = *self.parents[0];
    Array& g = pp.grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t l = 0; l < len; ++l) {
        if (!valid[b * len + l]) continue;
        const double v = pp.value[b * len + l];
        g[b * len + l] += self.grad[b] * 2.0 * v / (eps + v * v);
      }
    }
  });
}

Tensor pool_interaction(const Tensor& x, const Mask& rows, std::vector<bool>* empty) {
  if (empty != nullptr) {
    const std::size_t batch = rows.shape.at(0), len = rows.shape.at(1);
    empty->assign(batch, false);
    for (std::size_t b = 0; b < batch; ++b) {
      bool any = false;
      for (std::size_t l = 0; l < len; ++l) any = any || rows[b * len + l];
      (*empty)[b] = !any;
    }
  }
  return ad::masked_mean(x, rows, true);
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || a.shape() != b.shape()) {
    throw DimensionError("cosine_similarity: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), d = a.dim(1);
  Array out({batch});
  std::vector<double> na(batch), nb(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    double dot = 0, sa = 0, sb = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = a.value()[r * d + j], y = b.value()[r * d + j];
      dot += x * y;
      sa += x * x;
      sb += y * y;
    }
    na[r] = std::sqrt(sa);
    nb[r] = std::sqrt(sb);
    out[r] = (na[r] < kZeroNorm || nb[r] < kZeroNorm) ? 0.0 : dot / (na[r] * nb[r]);
  }
  return ad::make_result(std::move(out), {a, b}, [batch, d, na, nb](ad::Node& self) {
    ad::Node& pa = *self.parents[0];
    ad::Node& pb = *self.parents[1];
    for (std::size_t r = 0; r < batch; ++r) {
      if (na[r] < kZeroNorm || nb[r] < kZeroNorm) continue;
      const double s = self.value[r], g = self.grad[r];
      const double inv = 1.0 / (na[r] * nb[r]);
      if (pa.requires_grad) {
        Array& ga = pa.grad_buffer();
        for (std::size_t j = 0; j < d; ++j) {
          ga[r * d + j] += g * (pb.value[r * d + j] * inv - s * pa.value[r * d + j] / (na[r] * na[r]));
        }
      }
      if (pb.requires_grad) {
        Array& gb = pb.grad_buffer();
        for (std::size_t j = 0; j < d; ++j) {
          gb[r * d + j] += g * (pa.value[r * d + j] * inv - s * pb.value[r * d + j] / (nb[r] * nb[r]));
        }
      }
    }
  });
}

std::vector<std::pair<Pair, Pair>> contrastive_pair_set() {
  std::vector<std::pair<Pair, Pair>> out;
  for (std::size_t i = 0; i < model::kPairCount; ++i) {
    for (std::size_t j = 0; j < model::kPairCount; ++j) {
      if (i != j) out.emplace_back(static_cast<Pair>(i), static_cast<Pair>(j));
    }
  }
  return out;
}

std::array<std::pair<Pair, Pair>, 3> positive_pairs() {
  return {{{Pair::kMD, Pair::kDM}, {Pair::kCM, Pair::kMC}, {Pair::kCD, Pair::kDC}}};
}

Tensor contrastive_loss(const std::array<Tensor, model::kPairCount>& pooled, double tau,
                        ContrastiveDenominator denominator) {
  if (!(tau > 0)) throw ConfigError("contrastive_loss: tau must be positive");
  const std::size_t batch = pooled[0].dim(0);
  // Cosine similarity is symmetric; compute each unordered pair once.
  std::array<std::array<Tensor, model::kPairCount>, model::kPairCount> sim;
  for (std::size_t i = 0; i < model::kPairCount; ++i) {
    for (std::size_t j = i + 1; j < model::kPairCount; ++j) {
      sim[i][j] = ad::scale(ad::reshape(cosine_similarity(pooled[i], pooled[j]), {batch, 1}), 1.0 / tau);
      sim[j][i] = sim[i][j];
    }
  }
  auto logits_of = [&](const std::vector<std::pair<Pair, Pair>>& pairs) {
    std::vector<Tensor> cols;
    cols.reserve(pairs.size());
    for (const auto& [x, y] : pairs) cols.push_back(sim[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)]);
    return ad::logsumexp_rows(ad::concat(cols, 1));
  };

  const auto all = contrastive_pair_set();
  Tensor global_lse;
  if (denominator == ContrastiveDenominator::kGlobal) global_lse = logits_of(all);

  Tensor total;
  for (const auto& [anchor, positive] : positive_pairs()) {
    Tensor lse = global_lse;
    if (denominator == ContrastiveDenominator::kPerAnchor) {
      std::vector<std::pair<Pair, Pair>> anchored;
      for (const auto& pr : all) {
        if (pr.first == anchor) anchored.push_back(pr);
      }
      lse = logits_of(anchored);
    }
    const Tensor s = ad::reshape(sim[static_cast<std::size_t>(anchor)][static_cast<std::size_t>(positive)], {batch});
    const Tensor term = ad::sub(lse, s);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

Tensor contrastive_loss(const InteractionSet& interactions, double tau, ContrastiveDenominator denominator) {
  std::array<Tensor, model::kPairCount> pooled;
  for (std::size_t i = 0; i < model::kPairCount; ++i) {
    pooled[i] = pool_interaction(interactions.items[i].value, interactions.items[i].selected);
  }
  return contrastive_loss(pooled, tau, denominator);
}

Tensor wbce_loss(const Tensor& y_hat, const std::vector<int>& labels, const data::ClassWeights& weights,
                 bool swap) {
  if (y_hat.shape().size() != 1 || y_hat.dim(0) != labels.size()) {
    throw DimensionError("wbce_loss: predictions " + shape_string(y_hat.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const double w_pos = swap ? weights.positive : weights.negative;
  const double w_neg = swap ? weights.negative : weights.positive;
  const std::size_t n = labels.size();
  Array out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(y_hat.value()[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    out[i] = labels[i] == 1 ? -w_pos * std::log(p) : -w_neg * std::log(1.0 - p);
  }
  return ad::make_result(std::move(out), {y_hat}, [n, labels, w_pos, w_neg](ad::Node& self) {
    ad::Node& py = *self.parents[0];
    Array& g = py.grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double p = py.value[i];
      if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) continue;
      g[i] += self.grad[i] * (labels[i] == 1 ? -w_pos / p : w_neg / (1.0 - p));
    }
  });
}

Tensor total_loss(const Tensor& cls, const Tensor& cauchy, const Tensor& contrastive, double lambda_cauchy,
                  double lambda_contrastive) {
  return ad::add(cls, ad::add(ad::scale(cauchy, lambda_cauchy), ad::scale(contrastive, lambda_contrastive)));
}

}  // namespace mexa::loss
