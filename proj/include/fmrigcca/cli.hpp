#pragma once

#include "fmrigcca/gcca.hpp"
#include "fmrigcca/pipeline.hpp"
#include "fmrigcca/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fmrigcca::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Preprocessing applied to a dataset directory before any computation.
struct Preprocessing {
  Index drop_volumes = 0;
  bool dedrift = false;
};

struct GenerateConfig {
  synth::SynthConfig synth;
  fs::path out;
};

struct FitConfig {
  fs::path data;
  fs::path out;
  Preprocessing prep;
  pipeline::PipelineOptions pipeline;
  bool both_variants = false;
};

struct RankProfileConfig {
  fs::path data;
  fs::path out;
  Preprocessing prep;
  bool spatial = true;
  bool temporal = false;
  std::vector<Index> ranks;
  Index spatial_rank = 0;
  std::vector<Index> temporal_ranks;
  int partitions = 5;
  double threshold = 0.9;
  std::uint64_t seed = 0;
  double rel_tol = gcca::kDefaultRelTol;
  unsigned threads = 1;
};

struct SweepConfig {
  synth::SynthConfig synth;
  synth::SweepOptions sweep;
  fs::path out;
  bool long_format = false;
};

struct EvaluateConfig {
  fs::path data;
  fs::path fit;
  fs::path regressor;  // empty: use <data>/truth/s.gcm
  fs::path out;
  double fraction = 0.1;
};

/// Typed configurations from a merged JSON document. Every value is validated against the
/// preconditions of the modules it feeds; failures throw ValidationError.
GenerateConfig parse_generate(const json& doc);
FitConfig parse_fit(const json& doc);
RankProfileConfig parse_rank_profile(const json& doc);
SweepConfig parse_sweep(const json& doc);
EvaluateConfig parse_evaluate(const json& doc);

/// "1:12", "1,2,5" or "1:3,8" into an ascending-as-written list.
std::vector<Index> parse_rank_list(const std::string& text);
/// Comma-separated numbers; "inf" is the noiseless sentinel.
std::vector<double> parse_number_list(const std::string& text);

/// FNV-1a 64 of the canonical (sorted-key) JSON dump, path keys excluded.
std::uint64_t config_hash(const json& doc);

/// Dataset directory: subject_%03d.gcm files plus optional truth/ and manifest.json.
MultiSubjectDataset load_dataset(const fs::path& dir);
bool has_truth(const fs::path& dir);

void cmd_generate(const GenerateConfig& cfg, const json& doc);
void cmd_fit(const FitConfig& cfg, const json& doc);
void cmd_rank_profile(const RankProfileConfig& cfg, const json& doc, std::ostream& log);
void cmd_sweep(const SweepConfig& cfg, const json& doc, std::ostream& log);
void cmd_evaluate(const EvaluateConfig& cfg, const json& doc);

/// Full command-line entry point; returns the process exit code
/// (0 success, 2 validation, 3 numerical failure, 4 I/O).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fmrigcca::cli
