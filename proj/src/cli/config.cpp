#include "fmrigcca/cli.hpp"

#include "fmrigcca/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace fmrigcca::cli {

namespace {

template <typename T>
T value_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path require_path(const json& doc, const char* key) {
  const auto p = value_or<std::string>(doc, key, "");
  if (p.empty()) throw ValidationError(std::string("missing required setting '") + key + "'");
  return p;
}

double number_token(std::string_view tok) {
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ValidationError("cannot parse number '" + std::string(tok) + "'");
  return v;
}

Index integer_token(std::string_view tok) {
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ValidationError("cannot parse integer '" + std::string(tok) + "'");
  return static_cast<Index>(v);
}

// Numbers may be given as JSON numbers, "inf", or comma-separated strings.
double snr_value(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return number_token(v.get<std::string>());
  throw ValidationError("SNR values must be numbers or \"inf\"");
}

std::vector<Index> rank_list(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return {};
  const auto& v = doc.at(key);
  if (v.is_string()) return parse_rank_list(v.get<std::string>());
  if (v.is_array()) {
    std::vector<Index> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ValidationError(std::string("config key '") + key + "' must hold integers");
      out.push_back(e.get<Index>());
    }
    return out;
  }
  throw ValidationError(std::string("config key '") + key + "' must be a rank list");
}

Preprocessing parse_prep(const json& doc) {
  Preprocessing p;
  p.drop_volumes = value_or<Index>(doc, "drop_volumes", 0);
  p.dedrift = value_or<bool>(doc, "dedrift", false);
  if (p.drop_volumes < 0) throw ValidationError("drop_volumes must be >= 0");
  return p;
}

double rel_tol_of(const json& doc) {
  const double t = value_or<double>(doc, "rel_tol", gcca::kDefaultRelTol);
  if (!(t > 0.0 && t < 1.0)) throw ValidationError("rel_tol must lie in (0, 1)");
  return t;
}

unsigned threads_of(const json& doc) {
  const auto t = value_or<long long>(doc, "threads", 1);
  if (t < 1) throw ValidationError("threads must be >= 1");
  return static_cast<unsigned>(t);
}

pipeline::AoOptions parse_ao(const json& doc) {
  pipeline::AoOptions ao;
  ao.n_inits = value_or<int>(doc, "n_inits", ao.n_inits);
  ao.max_iters = value_or<int>(doc, "max_iters", ao.max_iters);
  ao.conv_tol = value_or<double>(doc, "conv_tol", ao.conv_tol);
  ao.seed = value_or<std::uint64_t>(doc, "seed", 0);
  ao.threads = threads_of(doc);
  if (ao.n_inits < 1) throw ValidationError("n_inits must be >= 1");
  if (ao.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(ao.conv_tol >= 0.0)) throw ValidationError("conv_tol must be >= 0");
  return ao;
}

synth::SynthConfig parse_synth(const json& doc) {
  synth::SynthConfig c;
  c.n_voxels = value_or<Index>(doc, "n_voxels", c.n_voxels);
  c.n_timepoints = value_or<Index>(doc, "n_timepoints", c.n_timepoints);
  c.n_subjects = value_or<Index>(doc, "n_subjects", c.n_subjects);
  c.common_rank = value_or<Index>(doc, "common_rank", c.common_rank);
  if (doc.contains("snr_db") && !doc.at("snr_db").is_null()) c.snr_db = snr_value(doc.at("snr_db"));
  c.c_ratio = value_or<double>(doc, "c_ratio", c.c_ratio);
  c.seed = value_or<std::uint64_t>(doc, "seed", c.seed);
  c.trials = value_or<int>(doc, "trials", c.trials);
  synth::validate(c);
  return c;
}

}  // namespace

std::vector<Index> parse_rank_list(const std::string& text) {
  std::vector<Index> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      out.push_back(integer_token(item));
    } else {
      const Index lo = integer_token(item.substr(0, colon));
      const Index hi = integer_token(item.substr(colon + 1));
      if (hi < lo) throw ValidationError("empty rank range '" + std::string(item) + "'");
      for (Index r = lo; r <= hi; ++r) out.push_back(r);
    }
  }
  if (out.empty()) throw ValidationError("empty rank list");
  for (Index r : out)
    if (r < 1) throw ValidationError("ranks must be >= 1");
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(number_token(rest.substr(0, comma)));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

std::uint64_t config_hash(const json& doc) {
  json numeric = doc;
  for (const char* key : {"out", "data", "fit", "config"}) numeric.erase(key);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : numeric.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

GenerateConfig parse_generate(const json& doc) {
  GenerateConfig cfg;
  cfg.synth = parse_synth(doc);
  cfg.out = require_path(doc, "out");
  return cfg;
}

FitConfig parse_fit(const json& doc) {
  FitConfig cfg;
  cfg.data = require_path(doc, "data");
  cfg.out = require_path(doc, "out");
  cfg.prep = parse_prep(doc);
  auto& p = cfg.pipeline;
  p.rank = value_or<Index>(doc, "rank", 0);
  if (p.rank < 1) throw ValidationError("rank must be >= 1");
  p.rel_tol = rel_tol_of(doc);
  const auto route = value_or<std::string>(doc, "route", "auto");
  if (route == "auto") p.route = gcca::Route::automatic;
  else if (route == "direct") p.route = gcca::Route::direct;
  else if (route == "compressed") p.route = gcca::Route::compressed;
  else throw ValidationError("route must be auto, direct or compressed");
  const auto variant = value_or<std::string>(doc, "variant", "m2");
  if (variant == "m1") p.variant = pipeline::Variant::m1;
  else if (variant == "m2") p.variant = pipeline::Variant::m2;
  else if (variant == "both") cfg.both_variants = true;
  else throw ValidationError("variant must be m1, m2 or both");
  p.fit_both = cfg.both_variants;
  p.ao = parse_ao(doc);
  return cfg;
}

RankProfileConfig parse_rank_profile(const json& doc) {
  RankProfileConfig cfg;
  cfg.data = require_path(doc, "data");
  cfg.out = require_path(doc, "out");
  cfg.prep = parse_prep(doc);
  const auto kind = value_or<std::string>(doc, "kind", "spatial");
  if (kind == "spatial") {
    cfg.spatial = true;
    cfg.temporal = false;
  } else if (kind == "temporal") {
    cfg.spatial = false;
    cfg.temporal = true;
  } else if (kind == "both") {
    cfg.spatial = cfg.temporal = true;
  } else {
    throw ValidationError("kind must be spatial, temporal or both");
  }
  cfg.ranks = rank_list(doc, "ranks");
  cfg.spatial_rank = value_or<Index>(doc, "spatial_rank", 0);
  cfg.temporal_ranks = rank_list(doc, "temporal_ranks");
  cfg.partitions = value_or<int>(doc, "partitions", cfg.partitions);
  cfg.threshold = value_or<double>(doc, "threshold", cfg.threshold);
  cfg.seed = value_or<std::uint64_t>(doc, "seed", 0);
  cfg.rel_tol = rel_tol_of(doc);
  cfg.threads = threads_of(doc);
  if (cfg.spatial && cfg.ranks.empty()) cfg.ranks = parse_rank_list("1:10");
  if (cfg.temporal) {
    if (cfg.spatial_rank < 1) throw ValidationError("temporal profile needs spatial_rank >= 1");
    if (cfg.temporal_ranks.empty()) cfg.temporal_ranks = parse_rank_list("1:" + std::to_string(cfg.spatial_rank));
    for (Index r : cfg.temporal_ranks)
      if (r > cfg.spatial_rank) throw ValidationError("temporal ranks must not exceed spatial_rank");
  }
  for (Index r : cfg.ranks)
    if (r < 1) throw ValidationError("ranks must be >= 1");
  if (cfg.partitions < 1) throw ValidationError("partitions must be >= 1");
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  return cfg;
}

SweepConfig parse_sweep(const json& doc) {
  SweepConfig cfg;
  cfg.synth = parse_synth(doc);
  cfg.out = require_path(doc, "out");
  cfg.long_format = value_or<bool>(doc, "long", false);
  auto& s = cfg.sweep;
  if (doc.contains("snr_grid") && !doc.at("snr_grid").is_null()) {
    const auto& g = doc.at("snr_grid");
    if (g.is_string()) {
      s.snr_grid_db = parse_number_list(g.get<std::string>());
    } else if (g.is_array()) {
      for (const auto& v : g) s.snr_grid_db.push_back(snr_value(v));
    } else {
      throw ValidationError("snr_grid must be a list");
    }
  }
  if (s.snr_grid_db.empty()) throw ValidationError("snr_grid is empty");
  s.trials = cfg.synth.trials;
  s.seed = cfg.synth.seed;
  s.rel_tol = rel_tol_of(doc);
  s.ao = parse_ao(doc);
  return cfg;
}

EvaluateConfig parse_evaluate(const json& doc) {
  EvaluateConfig cfg;
  cfg.data = require_path(doc, "data");
  cfg.fit = require_path(doc, "fit");
  cfg.out = require_path(doc, "out");
  cfg.regressor = value_or<std::string>(doc, "regressor", "");
  cfg.fraction = value_or<double>(doc, "fraction", cfg.fraction);
  if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw ValidationError("fraction must lie in (0, 1]");
  return cfg;
}

}  // namespace fmrigcca::cli
