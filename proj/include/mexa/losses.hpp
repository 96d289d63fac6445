#pragma once

// Training objectives: Cauchy sparsity penalty on selection confidences,
// cross-mode contrastive loss over pooled interactions, class-weighted BCE,
// and their weighted combination.

#include <array>
#include <utility>
#include <vector>

#include "mexa/config.hpp"
#include "mexa/mode_experts.hpp"

namespace mexa::loss {

using ad::Tensor;
using model::InteractionSet;
using model::Pair;

/// Per-trial Σ log(1 + p²/ε) over valid tokens; p[B×L] -> [B].
Tensor cauchy_loss(const Tensor& p, const Mask& valid, double eps);

/// Masked mean over rows of x[B×L×d] using `rows` -> [B×d]. Batch entries
/// without any valid row yield a zero vector and are flagged in `empty`.
Tensor pool_interaction(const Tensor& x, const Mask& rows, std::vector<bool>* empty = nullptr);

/// Row-wise cosine similarity of a[B×d] and b[B×d] -> [B]. Defined as 0 (with
/// zero gradient) when either row is the zero vector.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

/// Ordered pairs of distinct interactions (I_{D'D}, I_{δ'δ}) with D' != D,
/// δ' != δ and (D', D) != (δ', δ).
std::vector<std::pair<Pair, Pair>> contrastive_pair_set();
/// (I_md, I_dm), (I_cm, I_mc), (I_cd, I_dc).
std::array<std::pair<Pair, Pair>, 3> positive_pairs();

/// Contrastive loss per trial from six pooled [B×d] vectors indexed by Pair.
/// kGlobal normalizes every positive pair by the sum over the whole pair
/// set; kPerAnchor only by the pairs whose first element is the anchor.
Tensor contrastive_loss(const std::array<Tensor, model::kPairCount>& pooled, double tau,
                        ContrastiveDenominator denominator = ContrastiveDenominator::kGlobal);
/// Pools each interaction over its selected rows, then applies the above.
Tensor contrastive_loss(const InteractionSet& interactions, double tau,
                        ContrastiveDenominator denominator = ContrastiveDenominator::kGlobal);

inline constexpr double kProbabilityClamp = 1e-7;

/// Per-sample −ω0·y·log ŷ − ω1·(1−y)·log(1−ŷ) with ŷ clamped to
/// [1e-7, 1−1e-7]. ω0 is the negative-label fraction, ω1 the positive one.
/// `swap` exchanges them (conventional placement).
Tensor wbce_loss(const Tensor& y_hat, const std::vector<int>& labels, const data::ClassWeights& weights,
                 bool swap = false);

/// L = L_cls + λ1·L_cauchy + λ2·L_contrastive on scalar components.
Tensor total_loss(const Tensor& cls, const Tensor& cauchy, const Tensor& contrastive, double lambda_cauchy,
                  double lambda_contrastive);

}  // namespace mexa::loss
