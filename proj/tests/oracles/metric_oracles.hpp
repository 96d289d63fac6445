#pragma once

// Naive reference implementations of the ranking metrics, written without
// sorting so they share no code path with the library.

#include <cstddef>
#include <functional>
#include <set>
#include <vector>

namespace mexa::oracle {

/// Fraction of (positive, negative) pairs ranked correctly; ties count half.
inline double roc_auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return credit / pairs;
}

/// Step integral of precision over recall: one point per distinct score,
/// predicting positive for every score >= the threshold.
inline double pr_auc_thresholds(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] == 1 ? tp : fp) += 1.0;
    }
    const double recall = tp / positives;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

/// Calls `fn(scores, labels)` for every label vector of every length 2..max_n
/// containing both classes, with scores enumerated exhaustively over
/// `levels` distinct values for n <= exhaustive_n and otherwise drawn from a
/// fixed cyclic pattern with ties.
template <typename Fn>
void for_each_instance(std::size_t max_n, std::size_t exhaustive_n, int levels, Fn&& fn) {
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t n = 2; n <= max_n; ++n) {
    y.assign(n, 0);
    s.assign(n, 0.0);
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
      for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((mask >> i) & 1U);
      if (n <= exhaustive_n) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < n; ++i) combos *= static_cast<std::size_t>(levels);
        for (std::size_t c = 0; c < combos; ++c) {
          std::size_t r = c;
          for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(r % static_cast<std::size_t>(levels)) / levels;
            r /= static_cast<std::size_t>(levels);
          }
          fn(s, y);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>((i * 7 + mask * 3) % 5) / 5.0;
        fn(s, y);
      }
    }
  }
}

}  // namespace mexa::oracle
