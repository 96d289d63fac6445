#include "mexa/config.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include "mexa/errors.hpp"

namespace mexa {
namespace {

using nlohmann::json;

TokenSelection parse_selection(const std::string& s) {
  if (s == "learned") return TokenSelection::kLearned;
  if (s == "all") return TokenSelection::kAll;
  if (s == "random") return TokenSelection::kRandom;
  throw ConfigError("token_selection must be learned|all|random, got '" + s + "'");
}

IndicatorDirection parse_direction(const std::string& s) {
  if (s == "keep_high") return IndicatorDirection::kKeepHigh;
  if (s == "literal") return IndicatorDirection::kLiteral;
  throw ConfigError("indicator_direction must be keep_high|literal, got '" + s + "'");
}

ContrastiveDenominator parse_denominator(const std::string& s) {
  if (s == "global") return ContrastiveDenominator::kGlobal;
  if (s == "per_anchor") return ContrastiveDenominator::kPerAnchor;
  throw ConfigError("contrastive_denominator must be global|per_anchor, got '" + s + "'");
}

NormPlacement parse_norm(const std::string& s) {
  if (s == "pre") return NormPlacement::kPre;
  if (s == "post") return NormPlacement::kPost;
  throw ConfigError("norm_placement must be pre|post, got '" + s + "'");
}

using Setter = std::function<void(RunConfig&, const json&)>;

template <typename T>
Setter set(T RunConfig::*member) {
  return [member](RunConfig& c, const json& v) { c.*member = v.get<T>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"cap_molecules", [](RunConfig& c, const json& v) { c.caps.molecules = v.get<std::size_t>(); }},
      {"cap_diseases", [](RunConfig& c, const json& v) { c.caps.diseases = v.get<std::size_t>(); }},
      {"cap_inclusion", [](RunConfig& c, const json& v) { c.caps.inclusion = v.get<std::size_t>(); }},
      {"cap_exclusion", [](RunConfig& c, const json& v) { c.caps.exclusion = v.get<std::size_t>(); }},
      {"d_model", set(&RunConfig::d_model)},
      {"heads", set(&RunConfig::heads)},
      {"layers", set(&RunConfig::layers)},
      {"ffn", set(&RunConfig::ffn)},
      {"head_blocks", set(&RunConfig::head_blocks)},
      {"norm_placement", [](RunConfig& c, const json& v) { c.norm_placement = parse_norm(v.get<std::string>()); }},
      {"equalized_lr", set(&RunConfig::equalized_lr)},
      {"lr", set(&RunConfig::lr)},
      {"beta1", set(&RunConfig::beta1)},
      {"beta2", set(&RunConfig::beta2)},
      {"adam_eps", set(&RunConfig::adam_eps)},
      {"batch_size", set(&RunConfig::batch_size)},
      {"epochs", set(&RunConfig::epochs)},
      {"patience", set(&RunConfig::patience)},
      {"grad_clip", set(&RunConfig::grad_clip)},
      {"lambda_cauchy", set(&RunConfig::lambda_cauchy)},
      {"lambda_contrastive", set(&RunConfig::lambda_contrastive)},
      {"threshold", set(&RunConfig::threshold)},
      {"cauchy_eps", set(&RunConfig::cauchy_eps)},
      {"tau", set(&RunConfig::tau)},
      {"swap_class_weights", set(&RunConfig::swap_class_weights)},
      {"contrastive_denominator",
       [](RunConfig& c, const json& v) { c.contrastive_denominator = parse_denominator(v.get<std::string>()); }},
      {"token_selection",
       [](RunConfig& c, const json& v) { c.token_selection = parse_selection(v.get<std::string>()); }},
      {"indicator_direction",
       [](RunConfig& c, const json& v) { c.indicator_direction = parse_direction(v.get<std::string>()); }},
      {"aggregation",
       [](RunConfig& c, const json& v) { c.aggregation = data::parse_aggregation(v.get<std::string>()); }},
      {"use_pe", set(&RunConfig::use_pe)},
      {"split_date", set(&RunConfig::split_date)},
      {"test_fraction", set(&RunConfig::test_fraction)},
      {"validation_fraction", set(&RunConfig::validation_fraction)},
      {"retrain_combined", set(&RunConfig::retrain_combined)},
      {"bootstrap_reps", set(&RunConfig::bootstrap_reps)},
      {"bootstrap_fraction", set(&RunConfig::bootstrap_fraction)},
      {"bootstrap_with_replacement", set(&RunConfig::bootstrap_with_replacement)},
      {"seed", set(&RunConfig::seed)},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(caps.molecules > 0 && caps.diseases > 0 && caps.inclusion > 0 && caps.exclusion > 0,
          "token caps must be positive");
  require(d_model > 0 && heads > 0 && d_model % heads == 0, "d_model must be a positive multiple of heads");
  require(d_model % 2 == 0 || !use_pe, "positional embeddings need an even d_model");
  require(layers > 0 && ffn > 0, "layers and ffn must be positive");
  require(lr >= 0, "lr must be non-negative");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  require(adam_eps > 0, "adam_eps must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(grad_clip >= 0, "grad_clip must be non-negative");
  require(lambda_cauchy >= 0 && lambda_contrastive >= 0, "loss weights must be non-negative");
  require(threshold > 0 && threshold < 1, "threshold must lie in (0, 1)");
  require(cauchy_eps > 0, "cauchy_eps must be positive");
  require(tau > 0, "tau must be positive");
  require(test_fraction >= 0 && test_fraction < 1, "test_fraction must lie in [0, 1)");
  require(validation_fraction >= 0 && validation_fraction < 1, "validation_fraction must lie in [0, 1)");
  require(bootstrap_reps >= 1, "bootstrap_reps must be at least 1");
  require(bootstrap_fraction > 0 && bootstrap_fraction <= 1, "bootstrap_fraction must lie in (0, 1]");
  if (!split_date.empty()) data::parse_date(split_date);
}

json to_json(const RunConfig& c) {
  return json{{"cap_molecules", c.caps.molecules},
              {"cap_diseases", c.caps.diseases},
              {"cap_inclusion", c.caps.inclusion},
              {"cap_exclusion", c.caps.exclusion},
              {"d_model", c.d_model},
              {"heads", c.heads},
              {"layers", c.layers},
              {"ffn", c.ffn},
              {"head_blocks", c.head_blocks},
              {"norm_placement", to_string(c.norm_placement)},
              {"equalized_lr", c.equalized_lr},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"grad_clip", c.grad_clip},
              {"lambda_cauchy", c.lambda_cauchy},
              {"lambda_contrastive", c.lambda_contrastive},
              {"threshold", c.threshold},
              {"cauchy_eps", c.cauchy_eps},
              {"tau", c.tau},
              {"swap_class_weights", c.swap_class_weights},
              {"contrastive_denominator", to_string(c.contrastive_denominator)},
              {"token_selection", to_string(c.token_selection)},
              {"indicator_direction", to_string(c.indicator_direction)},
              {"aggregation", data::to_string(c.aggregation)},
              {"use_pe", c.use_pe},
              {"split_date", c.split_date},
              {"test_fraction", c.test_fraction},
              {"validation_fraction", c.validation_fraction},
              {"retrain_combined", c.retrain_combined},
              {"bootstrap_reps", c.bootstrap_reps},
              {"bootstrap_fraction", c.bootstrap_fraction},
              {"bootstrap_with_replacement", c.bootstrap_with_replacement},
              {"seed", c.seed}};
}

RunConfig from_json(const json& j, const RunConfig& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = base;
  for (const auto& [key, value] : j.items()) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(c, value);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
    }
  }
  c.validate();
  return c;
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  c = from_json(json{{key, value}}, c);
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string to_string(NormPlacement n) { return n == NormPlacement::kPre ? "pre" : "post"; }

std::string to_string(TokenSelection s) {
  switch (s) {
    case TokenSelection::kLearned:
      return "learned";
    case TokenSelection::kAll:
      return "all";
    case TokenSelection::kRandom:
      return "random";
  }
  return "?";
}

std::string to_string(IndicatorDirection d) {
  return d == IndicatorDirection::kKeepHigh ? "keep_high" : "literal";
}

std::string to_string(ContrastiveDenominator d) {
  return d == ContrastiveDenominator::kGlobal ? "global" : "per_anchor";
}

}  // namespace mexa
