#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mexa/config.hpp"
#include "mexa/dataset.hpp"
#include "mexa/errors.hpp"
#include "mexa/evaluator.hpp"
#include "mexa/trainer.hpp"

namespace mexa::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Precedence: built-in defaults < --config file < --set overrides (in order).
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    c = from_json(j);
  }
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

void write_config(const fs::path& dir, const RunConfig& c) {
  write_text(dir / "resolved_config.json", to_json(c).dump(2));
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

eval::BootstrapOptions bootstrap_options(const RunConfig& c) {
  return {c.bootstrap_reps, c.bootstrap_fraction, c.bootstrap_with_replacement, c.seed};
}

std::vector<data::TrialRecord> pick_split(const std::string& which, const data::Dataset& ds, const RunConfig& c) {
  if (which == "all") return ds.records;
  data::Splits s = train::protocol_split(ds.records, c);
  if (which == "train") return s.train;
  if (which == "valid") return s.valid;
  return s.test;
}

void check_dims(const train::Checkpoint& ck, const data::DatasetManifest& m) {
  if (!(ck.dims == model::InputDims::from(m))) {
    throw ConfigError("checkpoint input dims (" + std::to_string(ck.dims.d_mol) + "," + std::to_string(ck.dims.d_dis) +
                      "," + std::to_string(ck.dims.d_txt) + ") do not match data (" + std::to_string(m.d_mol) + "," +
                      std::to_string(m.d_dis) + "," + std::to_string(m.d_txt) + ")");
  }
}

// ---- commands ----------------------------------------------------------------

struct SynthArgs {
  data::SynthOptions options;
  std::string phase = "III";
  std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  data::SynthOptions o = a.options;
  o.phase = data::parse_phase(a.phase);
  const data::Dataset ds = data::synthesize(o);
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  data::save_dataset(a.out, ds.manifest, ds.records);
  const json resolved{{"n", o.n},
                      {"seed", o.seed},
                      {"separability", o.separability},
                      {"d_mol", o.d_mol},
                      {"d_dis", o.d_dis},
                      {"d_txt", o.d_txt},
                      {"phase", a.phase},
                      {"signal_scale", o.signal_scale},
                      {"signal_probability", o.signal_probability}};
  write_text(a.out + ".synth.json", resolved.dump(2));
  out << "wrote " << ds.records.size() << " records to " << a.out << "\n";
}

struct RunArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string checkpoint;
  std::string out_dir;
  std::string split = "all";
  std::string grid;
  std::size_t jobs = 1;
};

void cmd_train(const RunArgs& a, std::ostream& out) {
  const RunConfig c = resolve_config(a.config, a.overrides);
  const fs::path dir = ensure_dir(a.out_dir);
  write_config(dir, c);
  const data::Dataset ds = data::load_dataset(a.data);
  const train::ProtocolResult r = train::run_protocol(ds, c);
  for (const auto& w : r.splits.warnings) out << "warning: " << w << "\n";

  const fs::path ckpt = dir / "model.ckpt";
  train::save_checkpoint(ckpt.string(), r.fit.params, c);
  const std::string hash = train::file_hash(ckpt.string());
  write_text(dir / "report.json", train::report_json(r.fit.report));

  json summary{{"checkpoint", "model.ckpt"},
               {"checkpoint_hash", hash},
               {"train", r.splits.train.size()},
               {"valid", r.splits.valid.size()},
               {"test", r.splits.test.size()},
               {"best_epoch", r.fit.report.best_epoch},
               {"test_roc_auc", std::isfinite(r.test_roc_auc) ? json(r.test_roc_auc) : json(nullptr)},
               {"test_pr_auc", std::isfinite(r.test_pr_auc) ? json(r.test_pr_auc) : json(nullptr)},
               {"test_f1", std::isfinite(r.test_f1) ? json(r.test_f1) : json(nullptr)}};
  write_text(dir / "summary.json", summary.dump(2));
  if (std::isfinite(r.test_roc_auc)) {
    const eval::MetricReport m = eval::bootstrap_eval(r.test.predictions, r.test.labels, bootstrap_options(c));
    write_text(dir / "test_metrics.tsv", eval::format_report(m));
  }
  out << "checkpoint " << ckpt.string() << " " << hash << "\n"
      << "best_epoch " << r.fit.report.best_epoch << "\n"
      << "test_roc_auc " << fmt(r.test_roc_auc) << "\n";
}

void cmd_eval(const RunArgs& a, std::ostream& out) {
  const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
  RunConfig c = ck.config;
  for (const auto& o : a.overrides) apply_override(c, o);
  c.validate();
  const data::Dataset ds = data::load_dataset(a.data);
  check_dims(ck, ds.manifest);
  const auto records = pick_split(a.split, ds, c);
  if (records.empty()) throw DataError("no records in split '" + a.split + "'");
  const std::vector<double> scores = train::predict(ck.params, ds.manifest, records, c);
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  const eval::MetricReport m = eval::bootstrap_eval(scores, labels, bootstrap_options(c));
  const std::string table = eval::format_report(m);
  if (!a.out_dir.empty()) {
    const fs::path dir = ensure_dir(a.out_dir);
    write_config(dir, c);
    write_text(dir / "metrics.tsv", table);
  }
  out << table;
}

void cmd_stats(const RunArgs& a, std::ostream& out) {
  const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
  RunConfig c = ck.config;
  for (const auto& o : a.overrides) apply_override(c, o);
  c.validate();
  const data::Dataset ds = data::load_dataset(a.data);
  check_dims(ck, ds.manifest);
  const auto records = pick_split(a.split, ds, c);
  std::ostringstream table;
  table << "mode\tvalid_count\tindex\tselected\tsamples\tratio\n";
  for (const auto& row : train::token_usage(ck.params, ds.manifest, records, c)) {
    table << row.mode << '\t' << row.valid_count << '\t' << row.index << '\t' << row.selected << '\t' << row.samples
          << '\t' << fmt(row.ratio) << '\n';
  }
  if (!a.out_dir.empty()) {
    const fs::path dir = ensure_dir(a.out_dir);
    write_config(dir, c);
    write_text(dir / "token_usage.tsv", table.str());
  }
  out << table.str();
}

// Grid file: {"cells": [{"name": "...", "set": {key: value}}],
//             "axes": {key: [values...]}}
// Every named cell is crossed with the cartesian product of the axes. A
// missing "cells" list means a single cell with no changes.
std::vector<train::GridCell> read_grid(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid " + path);
  json g;
  try {
    in >> g;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!g.is_object()) throw ConfigError(path + ": grid must be an object");
  for (const auto& [k, v] : g.items()) {
    if (k != "cells" && k != "axes") throw ConfigError(path + ": unknown grid key '" + k + "'");
  }
  std::vector<train::GridCell> named;
  if (g.contains("cells")) {
    for (const auto& cell : g.at("cells")) {
      const std::string name = cell.value("name", "");
      if (name.empty()) throw ConfigError(path + ": every cell needs a name");
      named.push_back({name, from_json(cell.value("set", json::object()), base)});
    }
  } else {
    named.push_back({"base", base});
  }
  if (!g.contains("axes")) return named;
  std::vector<train::GridCell> out;
  for (const auto& cell : named) {
    for (auto& sub : train::expand_grid(cell.config, g.at("axes"))) {
      out.push_back({cell.name + "|" + sub.name, std::move(sub.config)});
    }
  }
  return out;
}

void cmd_ablate(const RunArgs& a, std::ostream& out) {
  const RunConfig base = resolve_config(a.config, a.overrides);
  const fs::path dir = ensure_dir(a.out_dir);
  write_config(dir, base);
  const std::vector<train::GridCell> cells = read_grid(a.grid, base);
  json resolved = json::array();
  std::vector<RunConfig> configs;
  for (const auto& cell : cells) {
    resolved.push_back({{"name", cell.name}, {"config", to_json(cell.config)}});
    configs.push_back(cell.config);
  }
  write_text(dir / "grid_resolved.json", resolved.dump(2));

  const data::Dataset ds = data::load_dataset(a.data);
  const auto results = train::run_protocols(ds, configs, a.jobs);

  std::ostringstream rows;
  rows << "cell\tseed\tbest_epoch\tvalid_cls\tvalid_roc_auc\ttest_roc_auc\ttest_pr_auc\ttest_f1\n";
  struct Acc {
    double valid_cls = 0, test_roc = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> by_group;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& r = results[i];
    const auto& rep = r.fit.report;
    const double valid_roc = rep.best_epoch ? rep.epochs[rep.best_epoch - 1].valid_roc_auc : train::kNaN;
    rows << cells[i].name << '\t' << cells[i].config.seed << '\t' << rep.best_epoch << '\t' << fmt(rep.best_valid_cls)
         << '\t' << fmt(valid_roc) << '\t' << fmt(r.test_roc_auc) << '\t' << fmt(r.test_pr_auc) << '\t'
         << fmt(r.test_f1) << '\n';
    // Group by the named cell, averaging over axis values (typically seeds).
    const std::string group = cells[i].name.substr(0, cells[i].name.find('|'));
    if (!by_group.count(group)) order.push_back(group);
    Acc& acc = by_group[group];
    acc.valid_cls += rep.best_valid_cls;
    acc.test_roc += r.test_roc_auc;
    ++acc.n;
  }
  std::ostringstream summary;
  summary << "cell\truns\tmean_valid_cls\tmean_test_roc_auc\n";
  for (const auto& g : order) {
    const Acc& acc = by_group[g];
    const auto n = static_cast<double>(acc.n);
    summary << g << '\t' << acc.n << '\t' << fmt(acc.valid_cls / n) << '\t' << fmt(acc.test_roc / n) << '\n';
  }
  write_text(dir / "ablation_runs.tsv", rows.str());
  write_text(dir / "ablation_summary.tsv", summary.str());
  out << summary.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MEXA-CTP clinical trial outcome model"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset file");
  s->add_option("--n", synth.options.n, "Number of trials")->required();
  s->add_option("--seed", synth.options.seed, "Random seed");
  s->add_option("--separability", synth.options.separability, "Label signal strength in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--d-mol", synth.options.d_mol, "Molecule embedding width");
  s->add_option("--d-dis", synth.options.d_dis, "Disease embedding width");
  s->add_option("--d-txt", synth.options.d_txt, "Criteria embedding width");
  s->add_option("--phase", synth.phase, "Trial phase (I, II, III)");
  s->add_option("--signal-scale", synth.options.signal_scale, "Class-mean offset at separability 1");
  s->add_option("--signal-probability", synth.options.signal_probability, "Fraction of label-carrying tokens")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--out", synth.out, "Output dataset path")->required();

  RunArgs run_args;
  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", run_args.config, "JSON config file")->check(CLI::ExistingFile);
    c->add_option("--set", run_args.overrides, "Override a config key (key=value); repeatable");
  };
  auto add_data = [&](CLI::App* c) {
    c->add_option("--data", run_args.data, "Dataset file")->required()->check(CLI::ExistingFile);
  };

  auto* t = app.add_subcommand("train", "Split, fit and checkpoint");
  add_config(t);
  add_data(t);
  t->add_option("--out-dir", run_args.out_dir, "Output directory")->required();

  auto* e = app.add_subcommand("eval", "Bootstrap metrics of a checkpoint");
  auto* st = app.add_subcommand("stats", "Token-usage statistics of a checkpoint");
  for (auto* c : {e, st}) {
    c->add_option("--checkpoint", run_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    add_data(c);
    c->add_option("--set", run_args.overrides, "Override a config key (key=value); repeatable");
    c->add_option("--split", run_args.split, "Records to use")
        ->check(CLI::IsMember({"all", "train", "valid", "test"}));
    c->add_option("--out-dir", run_args.out_dir, "Output directory");
  }

  auto* ab = app.add_subcommand("ablate", "Train every cell of a config grid");
  add_config(ab);
  add_data(ab);
  ab->add_option("--grid", run_args.grid, "Grid JSON file")->required()->check(CLI::ExistingFile);
  ab->add_option("--out-dir", run_args.out_dir, "Output directory")->required();
  ab->add_option("--jobs", run_args.jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  }

  try {
    if (*s) cmd_synth(synth, out);
    if (*t) cmd_train(run_args, out);
    if (*e) cmd_eval(run_args, out);
    if (*st) cmd_stats(run_args, out);
    if (*ab) cmd_ablate(run_args, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace mexa::cli
