#include "mexa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <exception>
#include <numeric>
#include <optional>
#include <thread>

#include "json.hpp"
#include "mexa/errors.hpp"
#include "mexa/evaluator.hpp"

namespace mexa::train {
namespace {

using data::TrialRecord;
using nlohmann::json;

constexpr std::size_t kEvalBatch = 256;

std::vector<const TrialRecord*> pointers(const std::vector<TrialRecord>& records, std::size_t begin,
                                         std::size_t end, const std::vector<std::size_t>* order = nullptr) {
  std::vector<const TrialRecord*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&records[order ? (*order)[i] : i]);
  return out;
}

struct EpochTotals {
  double total = 0;
  double cls = 0;
};

EpochTotals train_epoch(ModelParams& params, ParamList& leaves, OptimizerState& opt,
                        const data::DatasetManifest& manifest, const std::vector<TrialRecord>& train,
                        const RunConfig& config, const data::ClassWeights& weights, Rng& shuffle_rng,
                        Rng& selection_rng, std::size_t epoch) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const AdamOptions adam = AdamOptions::from(config);
  EpochTotals totals;
  std::size_t step = 0;
  for (std::size_t begin = 0; begin < train.size(); begin += config.batch_size, ++step) {
    const std::size_t end = std::min(train.size(), begin + config.batch_size);
    const data::PaddedBatch batch =
        data::pad_and_mask(pointers(train, begin, end, &order), manifest, config.caps, config.aggregation);
    for (auto& p : leaves) p.zero_grad();
    const model::ForwardResult r = model::forward(params, batch, config, weights, selection_rng);
    const double loss = r.total.item();
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
    }
    r.total.backward();
    if (config.grad_clip > 0) clip_grad_norm(leaves, config.grad_clip);
    adam_step(leaves, opt, adam);
    const auto n = static_cast<double>(end - begin);
    totals.total += loss * n;
    totals.cls += r.cls.item() * n;
  }
  totals.total /= static_cast<double>(train.size());
  totals.cls /= static_cast<double>(train.size());
  return totals;
}

bool both_classes(const std::vector<int>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return pos > 0 && static_cast<std::size_t>(pos) < labels.size();
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json epochs_json(const std::vector<EpochRecord>& epochs) {
  json arr = json::array();
  for (const auto& e : epochs) {
    arr.push_back({{"epoch", e.epoch},
                   {"train_total", num(e.train_total)},
                   {"train_cls", num(e.train_cls)},
                   {"valid_total", num(e.valid_total)},
                   {"valid_cls", num(e.valid_cls)},
                   {"valid_roc_auc", num(e.valid_roc_auc)},
                   {"valid_pr_auc", num(e.valid_pr_auc)}});
  }
  return arr;
}

// Runs the optimization loop. With `valid` non-empty, selects the best epoch
// by validation classification loss (with patience); otherwise trains for
// exactly `epochs` epochs.
std::vector<EpochRecord> run(ModelParams& params, const data::DatasetManifest& manifest,
                             const std::vector<TrialRecord>& train, const std::vector<TrialRecord>& valid,
                             const RunConfig& config, std::size_t epochs, TrainReport* selection,
                             ModelParams* best) {
  ParamList leaves = params.parameters();
  OptimizerState opt = OptimizerState::for_params(leaves);
  const data::ClassWeights weights = data::class_weights(train);
  Rng shuffle_rng = make_rng(config.seed, Stream::kShuffle);
  Rng selection_rng = make_rng(config.seed, Stream::kSelection);

  std::vector<EpochRecord> records;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const EpochTotals t =
        train_epoch(params, leaves, opt, manifest, train, config, weights, shuffle_rng, selection_rng, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_total = t.total;
    rec.train_cls = t.cls;
    if (!valid.empty()) {
      const LossSummary v = evaluate(params, manifest, valid, config, weights);
      rec.valid_total = v.total;
      rec.valid_cls = v.cls;
      if (both_classes(v.labels)) {
        rec.valid_roc_auc = eval::roc_auc(v.predictions, v.labels);
        rec.valid_pr_auc = eval::pr_auc(v.predictions, v.labels);
      }
    }
    records.push_back(rec);
    if (selection == nullptr) continue;
    const bool improved = valid.empty() || !(rec.valid_cls >= selection->best_valid_cls);
    if (improved) {
      selection->best_epoch = epoch;
      selection->best_valid_cls = rec.valid_cls;
      selection->best_valid_pr_auc = rec.valid_pr_auc;
      best->copy_values_from(params);
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      selection->early_stopped = true;
      break;
    }
  }
  return records;
}

}  // namespace

LossSummary evaluate(const ModelParams& params, const data::DatasetManifest& manifest,
                     const std::vector<TrialRecord>& records, const RunConfig& config,
                     const data::ClassWeights& weights) {
  ad::NoGradGuard no_grad;
  LossSummary s;
  if (records.empty()) return s;
  Rng selection_rng = make_rng(config.seed, Stream::kSelection);
  s.total = s.cls = s.cauchy = s.contrastive = 0.0;
  for (std::size_t begin = 0; begin < records.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(records.size(), begin + kEvalBatch);
    const data::PaddedBatch batch =
        data::pad_and_mask(pointers(records, begin, end), manifest, config.caps, config.aggregation);
    const model::ForwardResult r = model::forward(params, batch, config, weights, selection_rng);
    const auto n = static_cast<double>(end - begin);
    s.total += r.total.item() * n;
    s.cls += r.cls.item() * n;
    s.cauchy += r.cauchy.item() * n;
    s.contrastive += r.contrastive.item() * n;
    const auto y = r.prediction.y_hat.value().data();
    s.predictions.insert(s.predictions.end(), y.begin(), y.end());
    s.labels.insert(s.labels.end(), batch.labels.begin(), batch.labels.end());
  }
  const auto n = static_cast<double>(records.size());
  s.total /= n;
  s.cls /= n;
  s.cauchy /= n;
  s.contrastive /= n;
  return s;
}

std::vector<double> predict(const ModelParams& params, const data::DatasetManifest& manifest,
                            const std::vector<TrialRecord>& records, const RunConfig& config) {
  return evaluate(params, manifest, records, config, data::ClassWeights{}).predictions;
}

FitResult fit(const data::DatasetManifest& manifest, const std::vector<TrialRecord>& train,
              const std::vector<TrialRecord>& valid, const RunConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("fit: empty training split");
  const model::InputDims dims = model::InputDims::from(manifest);

  FitResult out{TrainReport{}, ModelParams::create(dims, config)};
  out.report.seed = config.seed;
  out.report.config_hash = config_hash(config);
  ModelParams working = out.params.clone();
  out.report.epochs = run(working, manifest, train, valid, config, config.epochs, &out.report, &out.params);
  out.report.best_checkpoint = "epoch-" + std::to_string(out.report.best_epoch);

  if (config.retrain_combined && !valid.empty() && out.report.best_epoch > 0) {
    std::vector<TrialRecord> combined = train;
    combined.insert(combined.end(), valid.begin(), valid.end());
    ModelParams fresh = ModelParams::create(dims, config);
    out.report.retrain_epochs = run(fresh, manifest, combined, {}, config, out.report.best_epoch, nullptr, nullptr);
    out.report.retrained = true;
    out.params = std::move(fresh);
  }
  return out;
}

std::string report_json(const TrainReport& r) {
  const json j{{"seed", r.seed},
               {"config_hash", hex64(r.config_hash)},
               {"best_epoch", r.best_epoch},
               {"best_valid_cls", num(r.best_valid_cls)},
               {"best_valid_pr_auc", num(r.best_valid_pr_auc)},
               {"best_checkpoint", r.best_checkpoint},
               {"early_stopped", r.early_stopped},
               {"retrained", r.retrained},
               {"epochs", epochs_json(r.epochs)},
               {"retrain_epochs", epochs_json(r.retrain_epochs)}};
  return j.dump(2);
}

std::vector<GridCell> expand_grid(const RunConfig& base, const json& axes) {
  if (!axes.is_object() || axes.empty()) throw ConfigError("grid must be a non-empty object of key -> values");
  std::vector<GridCell> cells{{"", base}};
  for (const auto& [key, values] : axes.items()) {
    const json list = values.is_array() ? values : json::array({values});
    if (list.empty()) throw ConfigError("grid axis '" + key + "' has no values");
    std::vector<GridCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : list) {
        GridCell c{cell.name + (cell.name.empty() ? "" : ",") + key + "=" + v.dump(),
                   from_json(json{{key, v}}, cell.config)};
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

GridResult grid_search(const std::vector<GridCell>& cells, const data::DatasetManifest& manifest,
                       const std::vector<TrialRecord>& train, const std::vector<TrialRecord>& valid) {
  if (cells.empty()) throw ConfigError("grid_search: empty grid");
  if (valid.empty()) throw DataError("grid_search: needs a validation split");
  GridResult g;
  for (const auto& cell : cells) {
    RunConfig c = cell.config;
    c.retrain_combined = false;
    const FitResult fr = fit(manifest, train, valid, c);
    const std::size_t best = fr.report.best_epoch;
    const EpochRecord& rec = fr.report.epochs.at(best - 1);
    g.rows.push_back({cell.name, cell.config, rec.valid_cls, rec.valid_pr_auc, rec.valid_roc_auc, best});
  }
  g.ranking.resize(g.rows.size());
  std::iota(g.ranking.begin(), g.ranking.end(), std::size_t{0});
  auto key = [](double v, double fallback) { return std::isfinite(v) ? v : fallback; };
  std::stable_sort(g.ranking.begin(), g.ranking.end(), [&](std::size_t a, std::size_t b) {
    const double la = key(g.rows[a].valid_cls, INFINITY), lb = key(g.rows[b].valid_cls, INFINITY);
    if (la != lb) return la < lb;
    return key(g.rows[a].valid_pr_auc, -INFINITY) > key(g.rows[b].valid_pr_auc, -INFINITY);
  });
  g.best = g.ranking.front();
  return g;
}

}  // namespace mexa::train

namespace mexa::train {

data::Splits protocol_split(const std::vector<TrialRecord>& records, const RunConfig& config) {
  const data::Date split = config.split_date.empty() ? data::quantile_split_date(records, config.test_fraction)
                                                     : data::parse_date(config.split_date);
  return data::temporal_split(records, split, config.validation_fraction, config.seed);
}

ProtocolResult run_protocol(const data::Dataset& dataset, const RunConfig& config) {
  data::Splits splits = protocol_split(dataset.records, config);
  FitResult fr = fit(dataset.manifest, splits.train, splits.valid, config);
  LossSummary test;
  if (!splits.test.empty()) {
    test = evaluate(fr.params, dataset.manifest, splits.test, config, data::class_weights(splits.train));
  }
  ProtocolResult out{std::move(splits), std::move(fr), std::move(test)};
  if (both_classes(out.test.labels)) {
    out.test_roc_auc = eval::roc_auc(out.test.predictions, out.test.labels);
    out.test_pr_auc = eval::pr_auc(out.test.predictions, out.test.labels);
    out.test_f1 = eval::f1_score(out.test.predictions, out.test.labels, config.threshold);
  }
  return out;
}

std::vector<ProtocolResult> run_protocols(const data::Dataset& dataset, const std::vector<RunConfig>& configs,
                                          std::size_t jobs) {
  std::vector<std::optional<ProtocolResult>> slots(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        slots[i].emplace(run_protocol(dataset, configs[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, configs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<ProtocolResult> out;
  out.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace mexa::train

namespace mexa::train {

std::vector<model::TokenUsageRow> token_usage(const ModelParams& params, const data::DatasetManifest& manifest,
                                              const std::vector<TrialRecord>& records, const RunConfig& config) {
  ad::NoGradGuard no_grad;
  model::TokenUsageCounter counter(config.caps.inclusion);
  Rng selection_rng = make_rng(config.seed, Stream::kSelection);
  for (std::size_t begin = 0; begin < records.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(records.size(), begin + kEvalBatch);
    const data::PaddedBatch batch =
        data::pad_and_mask(pointers(records, begin, end), manifest, config.caps, config.aggregation);
    counter.add(model::forward(params, batch, config, data::ClassWeights{}, selection_rng).experts);
  }
  return counter.table();
}

}  // namespace mexa::train
