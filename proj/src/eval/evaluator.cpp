#include "mexa/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mexa/errors.hpp"
#include "mexa/rng.hpp"

namespace mexa::eval {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("metric inputs differ in length: " + std::to_string(scores.size()) + " scores, " +
                         std::to_string(labels.size()) + " labels");
  }
}

std::size_t positives(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

void require_both_classes(std::span<const int> labels, const char* metric) {
  const std::size_t pos = positives(labels);
  if (pos == 0 || pos == labels.size()) {
    throw DataError(std::string(metric) + " is undefined when only one class is present");
  }
}

MetricSummary summarize(const char* name, const std::vector<double>& values) {
  MetricSummary s{name};
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace

double f1_score(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++tp;
    if (pred && labels[i] != 1) ++fp;
    if (!pred && labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  require_both_classes(labels, "ROC-AUC");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Sum of (average) ranks of positives; ranks are 1-based.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  const auto pos = static_cast<double>(positives(labels));
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  require_both_classes(labels, "PR-AUC");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<double>(positives(labels));
  double tp = 0, fp = 0, prev_recall = 0, ap = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

MetricReport bootstrap_eval(std::span<const double> scores, std::span<const int> labels,
                            const BootstrapOptions& o) {
  check_inputs(scores, labels);
  if (o.replicates == 0) throw ConfigError("bootstrap_eval: need at least one replicate");
  if (!(o.fraction > 0 && o.fraction <= 1)) throw ConfigError("bootstrap_eval: fraction must lie in (0, 1]");
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(std::floor(o.fraction * static_cast<double>(n)));
  if (k == 0) throw DataError("bootstrap_eval: sample size rounds to zero");

  Rng rng = make_rng(o.seed, Stream::kBootstrap);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  auto draw = [&] {
    std::vector<std::size_t> idx;
    if (o.with_replacement) {
      std::uniform_int_distribution<std::size_t> u(0, n - 1);
      for (std::size_t i = 0; i < k; ++i) idx.push_back(u(rng));
    } else {
      // Partial Fisher–Yates: the first k entries form a uniform subset.
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> u(i, n - 1);
        std::swap(pool[i], pool[u(rng)]);
      }
      idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return idx;
  };

  MetricReport report;
  report.replicates = o.replicates;
  report.fraction = o.fraction;
  report.with_replacement = o.with_replacement;
  report.seed = o.seed;
  std::vector<double> f1s, prs, rocs;
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t r = 0; r < o.replicates; ++r) {
    for (int attempt = 0;; ++attempt) {
      const auto idx = draw();
      s.clear();
      l.clear();
      for (auto i : idx) {
        s.push_back(scores[i]);
        l.push_back(labels[i]);
      }
      const std::size_t pos = positives(l);
      if (pos > 0 && pos < l.size()) break;
      if (attempt == 1) throw DataError("bootstrap_eval: replicate " + std::to_string(r) + " has a single class twice");
    }
    f1s.push_back(f1_score(s, l));
    prs.push_back(pr_auc(s, l));
    rocs.push_back(roc_auc(s, l));
    report.replicate_values.push_back({f1s.back(), prs.back(), rocs.back()});
  }
  report.f1 = summarize("f1", f1s);
  report.pr_auc = summarize("pr_auc", prs);
  report.roc_auc = summarize("roc_auc", rocs);
  return report;
}

std::string format_report(const MetricReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << "metric\tmean\tstd\n";
  for (const auto* m : {&report.f1, &report.pr_auc, &report.roc_auc}) {
    os << m->metric << '\t' << m->mean << '\t' << m->std << '\n';
  }
  return os.str();
}

}  // namespace mexa::eval
