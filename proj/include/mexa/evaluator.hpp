#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mexa::eval {

/// F1 at `threshold` (predict positive when score >= threshold). 0 when there
/// are no predicted and no actual positives.
double f1_score(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mann–Whitney statistic with half credit for ties. Throws DataError when
/// only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: Σ (R_k − R_{k−1}) · P_k over distinct score thresholds
/// in decreasing order. Throws DataError when only one class is present.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const MetricSummary&) const = default;
};

struct MetricReport {
  MetricSummary f1{"f1"};
  MetricSummary pr_auc{"pr_auc"};
  MetricSummary roc_auc{"roc_auc"};
  std::size_t replicates = 0;
  double fraction = 0.0;
  bool with_replacement = false;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> replicate_values;  // per replicate: f1, pr_auc, roc_auc

  bool operator==(const MetricReport&) const = default;
};

struct BootstrapOptions {
  std::size_t replicates = 10;
  double fraction = 0.8;
  bool with_replacement = false;
  std::uint64_t seed = 0;
};

/// Each replicate draws ⌊fraction·n⌋ indices (without replacement unless
/// requested) and recomputes all three metrics; reports mean and population
/// standard deviation. A single-class replicate is redrawn once before
/// raising DataError.
MetricReport bootstrap_eval(std::span<const double> scores, std::span<const int> labels,
                            const BootstrapOptions& options);

/// Tab-separated table: metric, mean, std.
std::string format_report(const MetricReport& report);

}  // namespace mexa::eval
