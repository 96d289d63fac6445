#pragma once

// Precomputed-embedding trial records: file format, padding, splits and a
// synthetic generator for desk-scale experiments.
//
// File format (UTF-8, one JSON document per line):
//   line 1   manifest  {"format":"mexa-ctp-embeddings","version":1,"phase":"III",
//                       "d_mol":32,"d_dis":16,"d_txt":64,"record_count":N,
//                       "encoders":{"molecule":"...","disease":"...","criteria":"..."}}
//   line 2.. record    {"trial_id":"NCT...","phase":"III","start_date":"2013-05-01",
//                       "label":1,"molecules":[[...]],"diseases":[[...]],
//                       "inclusion":[{"first_token":[...],"mean":[...],"sum":[...],
//                                     "token_count":12}],
//                       "exclusion":[...]}
// `token_count` is optional. Missing criteria are empty lists.

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mexa/array.hpp"

namespace mexa::data {

inline constexpr const char* kFormatName = "mexa-ctp-embeddings";
inline constexpr int kFormatVersion = 1;

enum class Phase : std::uint8_t { kI, kII, kIII };

std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

using Date = std::chrono::sys_days;

std::string format_date(Date d);
/// Parses YYYY-MM-DD; throws DataError on malformed or impossible dates.
Date parse_date(const std::string& s);

using Vector = std::vector<double>;

struct StatementEmbedding {
  Vector first_token;
  Vector mean;
  Vector sum;
  std::optional<int> token_count;

  bool operator==(const StatementEmbedding&) const = default;
};

struct TrialRecord {
  std::string trial_id;
  Phase phase = Phase::kIII;
  Date start_date{};
  int label = 0;
  std::vector<Vector> molecules;
  std::vector<Vector> diseases;
  std::vector<StatementEmbedding> inclusion;
  std::vector<StatementEmbedding> exclusion;

  bool operator==(const TrialRecord&) const = default;
};

struct DatasetManifest {
  std::size_t d_mol = 0;
  std::size_t d_dis = 0;
  std::size_t d_txt = 0;
  std::map<std::string, std::string> encoders;
  std::size_t record_count = 0;
  Phase phase = Phase::kIII;

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<TrialRecord> records;
};

/// Throws DataError naming the line (1-based) and trial id of the first
/// malformed record.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);
/// Writes the manifest (with record_count refreshed) and the records.
void write_dataset(std::ostream& out, const DatasetManifest& manifest,
                   const std::vector<TrialRecord>& records);
void save_dataset(const std::string& path, const DatasetManifest& manifest,
                  const std::vector<TrialRecord>& records);

/// Checks a record against the manifest dimensions; throws DataError.
void validate_record(const TrialRecord& r, const DatasetManifest& m);

// ---- batching -------------------------------------------------------------

struct Caps {
  std::size_t molecules = 5;
  std::size_t diseases = 5;
  std::size_t inclusion = 8;
  std::size_t exclusion = 5;

  bool operator==(const Caps&) const = default;
};

enum class Aggregation : std::uint8_t { kFirstToken, kMean, kSum };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

/// Per-mode inputs padded to the caps. Tensors are [B×cap×dim]; masks [B×cap].
struct PaddedBatch {
  Array molecules;
  Array diseases;
  Array inclusion;
  Array exclusion;
  Mask molecule_mask;
  Mask disease_mask;
  Mask inclusion_mask;
  Mask exclusion_mask;
  std::vector<int> labels;
  std::vector<std::string> trial_ids;

  std::size_t size() const { return labels.size(); }
};

/// Pads each mode to its cap, truncating longer lists from the end so the
/// earliest entries are kept. `aggregation` chooses which statement vector
/// feeds the criteria modes.
PaddedBatch pad_and_mask(const std::vector<const TrialRecord*>& records, const DatasetManifest& m,
                         const Caps& caps, Aggregation aggregation);
PaddedBatch pad_and_mask(const std::vector<TrialRecord>& records, const DatasetManifest& m,
                         const Caps& caps, Aggregation aggregation);

// ---- splits and weights ---------------------------------------------------

struct Splits {
  std::vector<TrialRecord> train;
  std::vector<TrialRecord> valid;
  std::vector<TrialRecord> test;
  std::vector<std::string> warnings;
};

/// test = records starting on or after `split_date`; `validation_fraction` of
/// the remainder (rounded to nearest) is drawn without replacement as the
/// validation set. Deterministic given `seed`; input order is preserved
/// within each partition.
Splits temporal_split(const std::vector<TrialRecord>& records, Date split_date,
                      double validation_fraction, std::uint64_t seed);

/// Latest start date such that roughly `test_fraction` of records fall on or
/// after it. Used when no split date is configured.
Date quantile_split_date(const std::vector<TrialRecord>& records, double test_fraction);

struct ClassWeights {
  double negative = 0.5;  // ω0: fraction of negative labels
  double positive = 0.5;  // ω1: fraction of positive labels
  bool degenerate = false;
};

ClassWeights class_weights(const std::vector<int>& labels);
ClassWeights class_weights(const std::vector<TrialRecord>& records);

// ---- synthetic data -------------------------------------------------------

struct SynthOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double separability = 1.0;
  std::size_t d_mol = 32;
  std::size_t d_dis = 16;
  std::size_t d_txt = 64;
  Phase phase = Phase::kIII;
  /// Class-mean offset along the signal direction at separability 1.
  double signal_scale = 1.0;
  /// Probability that a token carries label signal rather than being a
  /// label-independent distractor.
  double signal_probability = 0.5;
};

/// Draws tokens from label-conditioned Gaussian mixtures. Signal tokens sit
/// at ±separability·signal_scale along a per-mode direction; distractor
/// tokens sit on an orthogonal direction regardless of label. Deterministic
/// given the seed.
Dataset synthesize(const SynthOptions& options);

}  // namespace mexa::data
