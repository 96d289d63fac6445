#include "mexa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mexa/errors.hpp"
#include "mexa/rng.hpp"

namespace mexa::data {
namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line, const std::string& id, const std::string& what) {
  std::string msg = "line " + std::to_string(line);
  if (!id.empty()) msg += " (record " + id + ")";
  throw DataError(msg + ": " + what);
}

const json& field(const json& j, const char* key, std::size_t line, const std::string& id) {
  auto it = j.find(key);
  if (it == j.end()) fail(line, id, std::string("missing field '") + key + "'");
  return *it;
}

Vector read_vector(const json& j, std::size_t dim, const char* what, std::size_t line,
                   const std::string& id) {
  if (!j.is_array()) fail(line, id, std::string(what) + " is not an array");
  if (j.size() != dim) {
    fail(line, id, std::string(what) + " has dimension " + std::to_string(j.size()) +
                       ", manifest declares " + std::to_string(dim));
  }
  Vector v;
  v.reserve(dim);
  for (const auto& x : j) {
    if (!x.is_number()) fail(line, id, std::string(what) + " contains a non-numeric entry");
    const double d = x.get<double>();
    if (!std::isfinite(d)) fail(line, id, std::string(what) + " contains a non-finite entry");
    v.push_back(d);
  }
  return v;
}

std::vector<Vector> read_vectors(const json& j, std::size_t dim, const char* what,
                                 std::size_t line, const std::string& id) {
  if (!j.is_array()) fail(line, id, std::string(what) + " is not a list");
  std::vector<Vector> out;
  for (const auto& v : j) out.push_back(read_vector(v, dim, what, line, id));
  return out;
}

std::vector<StatementEmbedding> read_statements(const json& j, std::size_t dim, const char* what,
                                                std::size_t line, const std::string& id) {
  if (!j.is_array()) fail(line, id, std::string(what) + " is not a list");
  std::vector<StatementEmbedding> out;
  for (const auto& s : j) {
    if (!s.is_object()) fail(line, id, std::string(what) + " statement is not an object");
    StatementEmbedding e;
    e.first_token = read_vector(field(s, "first_token", line, id), dim, what, line, id);
    e.mean = read_vector(field(s, "mean", line, id), dim, what, line, id);
    e.sum = read_vector(field(s, "sum", line, id), dim, what, line, id);
    if (auto it = s.find("token_count"); it != s.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<int>() <= 0) {
        fail(line, id, std::string(what) + " token_count must be a positive integer");
      }
      e.token_count = it->get<int>();
      for (std::size_t k = 0; k < dim; ++k) {
        if (std::abs(e.mean[k] * *e.token_count - e.sum[k]) > 1e-6 * std::max(1.0, std::abs(e.sum[k]))) {
          fail(line, id, std::string(what) + " mean*token_count disagrees with sum");
        }
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

json write_statement(const StatementEmbedding& s) {
  json j{{"first_token", s.first_token}, {"mean", s.mean}, {"sum", s.sum}};
  if (s.token_count) j["token_count"] = *s.token_count;
  return j;
}

json manifest_json(const DatasetManifest& m, std::size_t count) {
  return json{{"format", kFormatName},   {"version", kFormatVersion}, {"phase", to_string(m.phase)},
              {"d_mol", m.d_mol},        {"d_dis", m.d_dis},          {"d_txt", m.d_txt},
              {"record_count", count},   {"encoders", m.encoders}};
}

DatasetManifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(1, "", std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(1, "", "manifest is not an object");
  if (j.value("format", std::string{}) != kFormatName) fail(1, "", "unrecognized format tag");
  if (j.value("version", 0) != kFormatVersion) fail(1, "", "unsupported format version");
  DatasetManifest m;
  try {
    m.d_mol = field(j, "d_mol", 1, "").get<std::size_t>();
    m.d_dis = field(j, "d_dis", 1, "").get<std::size_t>();
    m.d_txt = field(j, "d_txt", 1, "").get<std::size_t>();
    m.record_count = field(j, "record_count", 1, "").get<std::size_t>();
    m.phase = parse_phase(field(j, "phase", 1, "").get<std::string>());
    if (auto it = j.find("encoders"); it != j.end()) {
      m.encoders = it->get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    fail(1, "", std::string("manifest field has wrong type: ") + e.what());
  }
  if (m.d_mol == 0 || m.d_dis == 0 || m.d_txt == 0) fail(1, "", "manifest dimensions must be positive");
  return m;
}

TrialRecord parse_record(const std::string& text, const DatasetManifest& m, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(line, "", std::string("record is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(line, "", "record is not an object");
  TrialRecord r;
  const json& id = field(j, "trial_id", line, "");
  if (!id.is_string()) fail(line, "", "trial_id is not a string");
  r.trial_id = id.get<std::string>();
  try {
    r.phase = parse_phase(field(j, "phase", line, r.trial_id).get<std::string>());
    r.start_date = parse_date(field(j, "start_date", line, r.trial_id).get<std::string>());
  } catch (const json::exception&) {
    fail(line, r.trial_id, "phase/start_date must be strings");
  } catch (const DataError& e) {
    fail(line, r.trial_id, e.what());
  }
  const json& label = field(j, "label", line, r.trial_id);
  if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
    fail(line, r.trial_id, "label must be 0 or 1");
  }
  r.label = label.get<int>();
  r.molecules = read_vectors(field(j, "molecules", line, r.trial_id), m.d_mol, "molecule", line, r.trial_id);
  r.diseases = read_vectors(field(j, "diseases", line, r.trial_id), m.d_dis, "disease", line, r.trial_id);
  r.inclusion = read_statements(field(j, "inclusion", line, r.trial_id), m.d_txt, "inclusion", line, r.trial_id);
  r.exclusion = read_statements(field(j, "exclusion", line, r.trial_id), m.d_txt, "exclusion", line, r.trial_id);
  return r;
}

void copy_rows(const std::vector<const Vector*>& rows, std::size_t cap, std::size_t dim,
               std::size_t b, Array& out, Mask& mask) {
  const std::size_t n = std::min(cap, rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(rows[i]->begin(), rows[i]->end(), out.data().begin() + (b * cap + i) * dim);
    mask.bits[b * cap + i] = 1;
  }
}

const Vector& pick(const StatementEmbedding& s, Aggregation a) {
  switch (a) {
    case Aggregation::kMean:
      return s.mean;
    case Aggregation::kSum:
      return s.sum;
    case Aggregation::kFirstToken:
      break;
  }
  return s.first_token;
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kI:
      return "I";
    case Phase::kII:
      return "II";
    case Phase::kIII:
      return "III";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  if (s == "I") return Phase::kI;
  if (s == "II") return Phase::kII;
  if (s == "III") return Phase::kIII;
  throw DataError("unknown phase '" + s + "'");
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date parse_date(const std::string& s) {
  int y = 0;
  unsigned mo = 0, d = 0;
  const bool shape_ok = s.size() == 10 && s[4] == '-' && s[7] == '-';
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto* first = s.data() + pos;
    auto [p, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && p == first + len;
  };
  if (!shape_ok || !num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d)) {
    throw DataError("unparsable date '" + s + "' (expected YYYY-MM-DD)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + s + "'");
  return Date{ymd};
}

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kFirstToken:
      return "first_token";
    case Aggregation::kMean:
      return "mean";
    case Aggregation::kSum:
      return "sum";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "first_token") return Aggregation::kFirstToken;
  if (s == "mean") return Aggregation::kMean;
  if (s == "sum") return Aggregation::kSum;
  throw ConfigError("unknown aggregation '" + s + "' (first_token|mean|sum)");
}

void validate_record(const TrialRecord& r, const DatasetManifest& m) {
  auto check = [&](const Vector& v, std::size_t dim, const char* what) {
    if (v.size() != dim) {
      throw DataError("record " + r.trial_id + ": " + what + " has dimension " +
                      std::to_string(v.size()) + ", manifest declares " + std::to_string(dim));
    }
  };
  if (r.label != 0 && r.label != 1) throw DataError("record " + r.trial_id + ": label must be 0 or 1");
  for (const auto& v : r.molecules) check(v, m.d_mol, "molecule");
  for (const auto& v : r.diseases) check(v, m.d_dis, "disease");
  for (const auto* list : {&r.inclusion, &r.exclusion}) {
    for (const auto& s : *list) {
      check(s.first_token, m.d_txt, "statement");
      check(s.mean, m.d_txt, "statement");
      check(s.sum, m.d_txt, "statement");
    }
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Dataset ds;
  bool have_manifest = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!have_manifest) {
      if (line_no != 1) fail(line_no, "", "manifest must be the first line");
      ds.manifest = parse_manifest(line);
      have_manifest = true;
      continue;
    }
    ds.records.push_back(parse_record(line, ds.manifest, line_no));
  }
  if (!have_manifest) throw DataError("line 1: missing manifest");
  if (ds.records.size() != ds.manifest.record_count) {
    throw DataError("manifest declares " + std::to_string(ds.manifest.record_count) +
                    " records, found " + std::to_string(ds.records.size()));
  }
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const DatasetManifest& manifest,
                   const std::vector<TrialRecord>& records) {
  out << manifest_json(manifest, records.size()).dump() << '\n';
  for (const auto& r : records) {
    validate_record(r, manifest);
    json inc = json::array(), exc = json::array();
    for (const auto& s : r.inclusion) inc.push_back(write_statement(s));
    for (const auto& s : r.exclusion) exc.push_back(write_statement(s));
    const json j{{"trial_id", r.trial_id},
                 {"phase", to_string(r.phase)},
                 {"start_date", format_date(r.start_date)},
                 {"label", r.label},
                 {"molecules", r.molecules},
                 {"diseases", r.diseases},
                 {"inclusion", inc},
                 {"exclusion", exc}};
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::string& path, const DatasetManifest& manifest,
                  const std::vector<TrialRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path + "'");
  write_dataset(out, manifest, records);
}

PaddedBatch pad_and_mask(const std::vector<const TrialRecord*>& records, const DatasetManifest& m,
                         const Caps& caps, Aggregation aggregation) {
  if (caps.molecules == 0 || caps.diseases == 0 || caps.inclusion == 0 || caps.exclusion == 0) {
    throw ConfigError("token caps must be positive");
  }
  const std::size_t n = records.size();
  PaddedBatch b;
  b.molecules = Array({n, caps.molecules, m.d_mol});
  b.diseases = Array({n, caps.diseases, m.d_dis});
  b.inclusion = Array({n, caps.inclusion, m.d_txt});
  b.exclusion = Array({n, caps.exclusion, m.d_txt});
  b.molecule_mask = Mask({n, caps.molecules}, false);
  b.disease_mask = Mask({n, caps.diseases}, false);
  b.inclusion_mask = Mask({n, caps.inclusion}, false);
  b.exclusion_mask = Mask({n, caps.exclusion}, false);
  for (std::size_t i = 0; i < n; ++i) {
    const TrialRecord& r = *records[i];
    std::vector<const Vector*> rows;
    for (const auto& v : r.molecules) rows.push_back(&v);
    copy_rows(rows, caps.molecules, m.d_mol, i, b.molecules, b.molecule_mask);
    rows.clear();
    for (const auto& v : r.diseases) rows.push_back(&v);
    copy_rows(rows, caps.diseases, m.d_dis, i, b.diseases, b.disease_mask);
    rows.clear();
    for (const auto& s : r.inclusion) rows.push_back(&pick(s, aggregation));
    copy_rows(rows, caps.inclusion, m.d_txt, i, b.inclusion, b.inclusion_mask);
    rows.clear();
    for (const auto& s : r.exclusion) rows.push_back(&pick(s, aggregation));
    copy_rows(rows, caps.exclusion, m.d_txt, i, b.exclusion, b.exclusion_mask);
    b.labels.push_back(r.label);
    b.trial_ids.push_back(r.trial_id);
  }
  return b;
}

PaddedBatch pad_and_mask(const std::vector<TrialRecord>& records, const DatasetManifest& m,
                         const Caps& caps, Aggregation aggregation) {
  std::vector<const TrialRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  return pad_and_mask(ptrs, m, caps, aggregation);
}

Splits temporal_split(const std::vector<TrialRecord>& records, Date split_date,
                      double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  Splits s;
  std::vector<std::size_t> pre;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].start_date >= split_date) {
      s.test.push_back(records[i]);
    } else {
      pre.push_back(i);
    }
  }
  if (!records.empty() && (pre.empty() || s.test.empty())) {
    s.warnings.push_back("split date " + format_date(split_date) +
                         " lies outside the data range; one partition is empty");
  }
  const auto n_valid =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(pre.size())));
  std::vector<std::size_t> order(pre.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_valid(pre.size(), 0);
  for (std::size_t i = 0; i < n_valid; ++i) is_valid[order[i]] = 1;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    (is_valid[i] ? s.valid : s.train).push_back(records[pre[i]]);
  }
  return s;
}

Date quantile_split_date(const std::vector<TrialRecord>& records, double test_fraction) {
  if (records.empty()) throw DataError("cannot choose a split date for an empty dataset");
  std::vector<Date> dates;
  for (const auto& r : records) dates.push_back(r.start_date);
  std::sort(dates.begin(), dates.end());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(dates.size())));
  if (n_test == 0) return dates.back() + std::chrono::days{1};
  return dates[dates.size() - std::min(n_test, dates.size())];
}

ClassWeights class_weights(const std::vector<int>& labels) {
  ClassWeights w;
  if (labels.empty()) {
    w.degenerate = true;
    return w;
  }
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  w.positive = static_cast<double>(pos) / static_cast<double>(labels.size());
  w.negative = static_cast<double>(neg) / static_cast<double>(labels.size());
  w.degenerate = pos == 0 || neg == 0;
  return w;
}

ClassWeights class_weights(const std::vector<TrialRecord>& records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return class_weights(labels);
}

// ---- synthesis ------------------------------------------------------------

namespace {

struct ModeGeometry {
  Vector signal;      // unit direction carrying the label
  Vector distractor;  // unit direction orthogonal to `signal`
};

Vector random_unit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g;
  Vector v(dim);
  double norm = 0;
  for (auto& x : v) {
    x = g(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

ModeGeometry make_geometry(std::size_t dim, Rng& rng) {
  ModeGeometry g{random_unit(dim, rng), random_unit(dim, rng)};
  double dot = 0;
  for (std::size_t i = 0; i < dim; ++i) dot += g.signal[i] * g.distractor[i];
  double norm = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    g.distractor[i] -= dot * g.signal[i];
    norm += g.distractor[i] * g.distractor[i];
  }
  norm = std::sqrt(norm);
  for (auto& x : g.distractor) x /= norm;
  return g;
}

constexpr double kDistractorOffset = 1.5;

Vector draw_token(const ModeGeometry& geo, int label, const SynthOptions& o, Rng& rng) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution is_signal(o.signal_probability);
  Vector v(geo.signal.size());
  for (auto& x : v) x = g(rng);
  if (is_signal(rng)) {
    const double offset = (label == 1 ? 1.0 : -1.0) * o.separability * o.signal_scale;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += offset * geo.signal[i];
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += kDistractorOffset * geo.distractor[i];
  }
  return v;
}

StatementEmbedding draw_statement(const ModeGeometry& geo, int label, const SynthOptions& o, Rng& rng) {
  std::normal_distribution<double> g(0.0, 0.5);
  std::uniform_int_distribution<int> words(3, 12);
  StatementEmbedding s;
  s.first_token = draw_token(geo, label, o, rng);
  const int k = words(rng);
  s.sum.assign(s.first_token.size(), 0.0);
  for (int w = 0; w < k; ++w) {
    for (std::size_t i = 0; i < s.sum.size(); ++i) s.sum[i] += s.first_token[i] + g(rng);
  }
  s.mean = s.sum;
  for (auto& x : s.mean) x /= k;
  s.token_count = k;
  return s;
}

}  // namespace

Dataset synthesize(const SynthOptions& o) {
  if (o.n == 0) throw ConfigError("synthesize: n must be positive");
  if (!(o.separability >= 0.0 && o.separability <= 1.0)) {
    throw ConfigError("synthesize: separability must lie in [0, 1]");
  }
  Rng rng = make_rng(o.seed, Stream::kSynth);
  const ModeGeometry mol = make_geometry(o.d_mol, rng);
  const ModeGeometry dis = make_geometry(o.d_dis, rng);
  const ModeGeometry inc = make_geometry(o.d_txt, rng);
  const ModeGeometry exc = make_geometry(o.d_txt, rng);

  Dataset ds;
  ds.manifest.d_mol = o.d_mol;
  ds.manifest.d_dis = o.d_dis;
  ds.manifest.d_txt = o.d_txt;
  ds.manifest.phase = o.phase;
  ds.manifest.encoders = {{"molecule", "synthetic-gaussian-mixture"},
                          {"disease", "synthetic-gaussian-mixture"},
                          {"criteria", "synthetic-gaussian-mixture"}};
  ds.manifest.record_count = o.n;

  const Date first_day = parse_date("2005-01-01");
  const Date last_day = parse_date("2016-12-31");
  std::uniform_int_distribution<int> day(0, static_cast<int>((last_day - first_day).count()));
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> n_mol(1, 6), n_dis(1, 6), n_inc(1, 10), n_exc(0, 6);

  char id[32];
  for (std::size_t i = 0; i < o.n; ++i) {
    TrialRecord r;
    std::snprintf(id, sizeof id, "SYN%06zu", i);
    r.trial_id = id;
    r.phase = o.phase;
    r.start_date = first_day + std::chrono::days{day(rng)};
    r.label = coin(rng) ? 1 : 0;
    for (int k = n_mol(rng); k > 0; --k) r.molecules.push_back(draw_token(mol, r.label, o, rng));
    for (int k = n_dis(rng); k > 0; --k) r.diseases.push_back(draw_token(dis, r.label, o, rng));
    for (int k = n_inc(rng); k > 0; --k) r.inclusion.push_back(draw_statement(inc, r.label, o, rng));
    for (int k = n_exc(rng); k > 0; --k) r.exclusion.push_back(draw_statement(exc, r.label, o, rng));
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace mexa::data
