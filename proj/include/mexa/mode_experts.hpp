#pragma once

// Mode experts: confidence-gated token selection per mode and the six directed
// cross-mode attention interactions.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mexa/config.hpp"
#include "mexa/encoder_bank.hpp"

namespace mexa::model {

enum class Mode : std::uint8_t { kMolecule = 0, kDisease = 1, kCriteria = 2 };
inline constexpr std::size_t kModeCount = 3;

struct ExpertParams {
  Tensor w_p;  // [d×1] selection projection
  Tensor w_q, w_k, w_v;
  bool equalized = false;

  static ExpertParams create(const std::string& name, std::size_t d_model, Rng& rng, bool equalized = false);
  void collect(ParamList& out) const;
};

struct SelectionResult {
  Tensor p;        // [B×L] confidence per token
  Mask valid;      // [B×L] non-padding tokens
  Mask hard;       // [B×L] kept tokens (always a subset of `valid`)
  Tensor targets;  // [B×L×d] kept rows scaled by p, other rows zero
};

struct SelectionOptions {
  double threshold = 0.5;
  TokenSelection variant = TokenSelection::kLearned;
  IndicatorDirection direction = IndicatorDirection::kLiteral;
  Rng* rng = nullptr;  // required for TokenSelection::kRandom
};

/// p = sigmoid(S·W_p). The hard mask keeps valid tokens with p >= t (or
/// p <= t under the literal indicator); `kAll` keeps every valid token and
/// `kRandom` keeps a uniformly random subset of valid tokens with the same
/// size as the learned mask. targets = hard ⊙ p ⊙ S; the hard mask is a
/// constant for differentiation.
SelectionResult select_tokens(const Tensor& s, const Mask& valid, const Tensor& w_p,
                              const SelectionOptions& options);

/// softmax(T·W_Q (S·W_K)ᵀ / √d) · S·W_V using the destination expert's
/// projections. Keys are the valid destination tokens; rows for query
/// tokens that were not kept are zero. Throws DegenerateMaskError (naming
/// `label`) when a batch entry has no valid destination token.
Tensor cross_attend(const SelectionResult& source, const Tensor& destination,
                    const Mask& destination_mask, const ExpertParams& destination_params,
                    const std::string& label = "cross_attend");

enum class Pair : std::uint8_t { kMD = 0, kDM, kCD, kDC, kMC, kCM };
inline constexpr std::size_t kPairCount = 6;

/// Source (querying) and destination mode of each directed pair.
Mode pair_source(Pair p);
Mode pair_destination(Pair p);
std::string pair_name(Pair p);

struct Interaction {
  Tensor value;   // [B×L_source×d]
  Mask valid;     // source-token validity
  Mask selected;  // source tokens that were kept as queries
};

struct InteractionSet {
  std::array<Interaction, kPairCount> items;

  Interaction& operator[](Pair p) { return items[static_cast<std::size_t>(p)]; }
  const Interaction& operator[](Pair p) const { return items[static_cast<std::size_t>(p)]; }
};

struct ExpertOutputs {
  std::array<SelectionResult, kModeCount> selections;
  InteractionSet interactions;
};

using ExpertBank = std::array<ExpertParams, kModeCount>;

/// Selects tokens in every mode and computes all six directed interactions.
ExpertOutputs run_experts(const EnrichedModes& enriched, const ExpertBank& experts,
                          const SelectionOptions& options);

// ---- token usage ---------------------------------------------------------

struct TokenUsageRow {
  std::string mode;  // molecule | disease | inclusion | exclusion
  std::size_t valid_count = 0;  // group x: number of valid tokens
  std::size_t index = 0;
  std::size_t selected = 0;
  std::size_t samples = 0;
  double ratio = 0.0;
  bool always_selected = false;  // x = 1 groups, conventionally omitted from plots
};

/// Accumulates how often each token index is kept, grouped by the number of
/// valid tokens in the mode.
class TokenUsageCounter {
 public:
  explicit TokenUsageCounter(std::size_t inclusion_cap) : inclusion_cap_(inclusion_cap) {}

  void add(const ExpertOutputs& outputs);
  void add(const std::string& mode, const Mask& valid, const Mask& hard, std::size_t offset,
           std::size_t length);

  std::vector<TokenUsageRow> table() const;
  std::size_t trials() const { return trials_; }

 private:
  struct Cell {
    std::size_t selected = 0;
    std::size_t samples = 0;
  };
  std::size_t inclusion_cap_;
  std::size_t trials_ = 0;
  // (mode, x, index) -> counts
  std::map<std::tuple<std::string, std::size_t, std::size_t>, Cell> cells_;
};

}  // namespace mexa::model
