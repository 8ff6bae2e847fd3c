#include "fmrigcca/cli.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/eval.hpp"
#include "fmrigcca/io.hpp"
#include "fmrigcca/rank.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace fmrigcca::cli {

namespace {

std::string subject_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03zu.gcm", k);
  return buf;
}

std::string factor_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S_%03zu.gcm", k);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failure on " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool same_location(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  if (fs::exists(a, ec) && fs::exists(b, ec)) return fs::equivalent(a, b, ec);
  return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

// Creates the output directory; refuses to write into any input directory.
void prepare_out(const fs::path& out, std::initializer_list<fs::path> inputs) {
  for (const auto& in : inputs)
    if (!in.empty() && same_location(out, in))
      throw ValidationError("output directory must differ from input " + in.string());
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

void write_manifest(const fs::path& out, const std::string& command, const json& doc, json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config"] = doc;
  m["config_hash"] = hex64(config_hash(doc));
  m["library_version"] = FMRIGCCA_VERSION;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(out / "manifest.json", m.dump(2) + "\n");
}

DenseMatrix column(const Vector& v) { return DenseMatrix(v); }

Vector load_vector(const fs::path& path) {
  const DenseMatrix m = io::load_matrix(path);
  if (m.cols() != 1 && m.rows() != 1)
    throw DimensionMismatchError(path.string() + ": expected a vector, got " + std::to_string(m.rows()) + "x" +
                                 std::to_string(m.cols()));
  return m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
}

Vector preprocess_series(const Vector& s, const Preprocessing& prep) {
  DenseMatrix row = s.transpose();
  if (prep.drop_volumes > 0) row = io::drop_initial_volumes(row, prep.drop_volumes);
  if (prep.dedrift) row = io::center_dedrift(row);
  return row.row(0).transpose();
}

MultiSubjectDataset load_prepared(const fs::path& dir, const Preprocessing& prep) {
  const auto raw = load_dataset(dir);
  if (prep.drop_volumes == 0 && !prep.dedrift) return raw;
  return io::preprocess(raw, prep.drop_volumes, prep.dedrift);
}

json variant_report(const pipeline::RankOneEstimate& est) {
  return json{{"fit", est.fit},
              {"converged", est.converged},
              {"iterations", est.iterations},
              {"n_inits_used", est.n_inits_used},
              {"collapsed_attempts", est.collapsed_attempts}};
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

bool has_truth(const fs::path& dir) {
  return fs::exists(dir / "truth" / "a.gcm") && fs::exists(dir / "truth" / "s.gcm") &&
         fs::exists(dir / "truth" / "lambda.gcm");
}

MultiSubjectDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " does not exist");
  std::vector<DenseMatrix> subjects;
  std::vector<std::string> labels;
  for (std::size_t k = 0;; ++k) {
    const fs::path p = dir / subject_file(k);
    if (!fs::exists(p)) break;
    subjects.push_back(io::load_matrix(p, io::MatrixFormat::binary));
    labels.push_back(p.stem().string());
  }
  if (subjects.size() < 2)
    throw IoError("dataset directory " + dir.string() + " holds fewer than two subject_NNN.gcm files");
  for (std::size_t k = 1; k < subjects.size(); ++k)
    if (subjects[k].rows() != subjects[0].rows() || subjects[k].cols() != subjects[0].cols())
      throw DimensionMismatchError(labels[k] + " does not match the shape of " + labels[0]);
  return MultiSubjectDataset(std::move(subjects), std::move(labels));
}

void cmd_generate(const GenerateConfig& cfg, const json& doc) {
  prepare_out(cfg.out, {});
  const auto ds = synth::generate(cfg.synth);
  fs::create_directories(cfg.out / "truth");
  for (std::size_t k = 0; k < ds.data.n_subjects(); ++k)
    io::save_matrix(ds.data.subject(k), cfg.out / subject_file(k), io::MatrixFormat::binary);
  const auto& t = ds.truth;
  io::save_matrix(column(t.a_true), cfg.out / "truth" / "a.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(t.s_true), cfg.out / "truth" / "s.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(t.lambda_true), cfg.out / "truth" / "lambda.gcm", io::MatrixFormat::binary);
  io::save_matrix(t.A, cfg.out / "truth" / "A.gcm", io::MatrixFormat::binary);
  for (std::size_t k = 0; k < t.S.size(); ++k)
    io::save_matrix(t.S[k], cfg.out / "truth" / factor_file(k), io::MatrixFormat::binary);

  const double snr = synth::realized_snr(ds);
  json extra = {{"n_subjects", ds.data.n_subjects()},
                {"n_voxels", ds.data.n_voxels()},
                {"n_timepoints", ds.data.n_timepoints()},
                {"beta", t.beta},
                {"sigma_e", t.sigma_e}};
  extra["realized_snr_db"] = std::isfinite(snr) ? json(10.0 * std::log10(snr)) : json("inf");
  write_manifest(cfg.out, "generate", doc, extra);
}

void cmd_fit(const FitConfig& cfg, const json& doc) {
  const auto data = load_prepared(cfg.data, cfg.prep);
  prepare_out(cfg.out, {cfg.data});
  const auto res = pipeline::run_two_stage(data, cfg.pipeline);

  io::save_matrix(res.subspace.basis, cfg.out / "G.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(res.temporal.g), cfg.out / "g.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(res.rank_one.a), cfg.out / "a.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(res.rank_one.lambda), cfg.out / "lambda.gcm", io::MatrixFormat::binary);

  std::vector<const pipeline::RankOneEstimate*> fits = {&res.rank_one};
  if (res.alternate) fits.push_back(&*res.alternate);
  json variants = json::object();
  for (const auto* est : fits) {
    const std::string tag = pipeline::to_string(est->variant);
    if (res.alternate) {
      io::save_matrix(column(est->a), cfg.out / ("a_" + tag + ".gcm"), io::MatrixFormat::binary);
      io::save_matrix(column(est->lambda), cfg.out / ("lambda_" + tag + ".gcm"), io::MatrixFormat::binary);
    }
    variants[tag] = variant_report(*est);
  }

  json report;
  report["dimensions"] = {{"n_voxels", data.n_voxels()},
                          {"n_timepoints", data.n_timepoints()},
                          {"n_subjects", data.n_subjects()},
                          {"rank", res.subspace.rank()}};
  report["preprocessing"] = {{"drop_volumes", cfg.prep.drop_volumes}, {"dedrift", cfg.prep.dedrift}};
  report["stage1"] = {{"route", gcca::to_string(res.subspace.route)},
                      {"objective", res.subspace.objective},
                      {"eigenvalues", to_std(res.subspace.eigenvalues)},
                      {"near_tie", res.subspace.near_tie}};
  report["stage2"] = {{"objective", res.temporal.objective}, {"near_tie", res.temporal.near_tie}};
  report["primary_variant"] = pipeline::to_string(res.rank_one.variant);
  report["stage3"] = variants;

  if (has_truth(cfg.data)) {
    const Vector s_true = preprocess_series(load_vector(cfg.data / "truth" / "s.gcm"), cfg.prep);
    const Vector a_true = load_vector(cfg.data / "truth" / "a.gcm");
    const Vector l_true = load_vector(cfg.data / "truth" / "lambda.gcm");
    json metrics = json::object();
    auto corr = [](const Vector& x, const Vector& y) -> json {
      try {
        return std::abs(synth::correlation_coefficient(x, y));
      } catch (const ValidationError&) {
        return nullptr;
      }
    };
    metrics["corr_s"] = corr(res.temporal.g, s_true);
    for (const auto* est : fits) {
      const std::string tag = pipeline::to_string(est->variant);
      metrics["corr_a_" + tag] = corr(est->a, a_true);
      metrics["corr_lambda_" + tag] = corr(est->lambda, l_true);
    }
    report["truth_metrics"] = metrics;
  }
  write_text(cfg.out / "report.json", report.dump(2) + "\n");
  write_manifest(cfg.out, "fit", doc);
}

void cmd_rank_profile(const RankProfileConfig& cfg, const json& doc, std::ostream& log) {
  const auto data = load_prepared(cfg.data, cfg.prep);
  if (data.n_subjects() < 4) throw ValidationError("rank profiles need at least four subjects");
  prepare_out(cfg.out, {cfg.data});
  json selection = json::object();
  if (cfg.spatial) {
    const auto p = rank::spatial_gap_profile(data, cfg.ranks, cfg.partitions, cfg.seed, cfg.rel_tol, cfg.threads);
    const std::string csv = rank::profile_csv(p);
    write_text(cfg.out / "spatial_profile.csv", csv);
    const Index chosen = rank::select_rank(p, cfg.threshold);
    selection["spatial"] = {{"selected_rank", chosen}, {"threshold", cfg.threshold}};
    log << "spatial gap profile\n" << csv << "selected spatial rank (advisory): " << chosen << "\n";
  }
  if (cfg.temporal) {
    const auto p = rank::temporal_gap_profile(data, cfg.spatial_rank, cfg.temporal_ranks, cfg.partitions, cfg.seed,
                                              cfg.rel_tol, cfg.threads);
    const std::string csv = rank::profile_csv(p);
    write_text(cfg.out / "temporal_profile.csv", csv);
    const Index chosen = rank::select_rank(p, cfg.threshold);
    selection["temporal"] = {{"selected_rank", chosen}, {"threshold", cfg.threshold}, {"spatial_rank", cfg.spatial_rank}};
    log << "temporal gap profile (spatial rank " << cfg.spatial_rank << ")\n"
        << csv << "selected temporal rank (advisory): " << chosen << "\n";
  }
  write_text(cfg.out / "selection.json", selection.dump(2) + "\n");
  write_manifest(cfg.out, "rank-profile", doc);
}

void cmd_sweep(const SweepConfig& cfg, const json& doc, std::ostream& log) {
  prepare_out(cfg.out, {});
  const auto result = synth::run_snr_sweep(cfg.synth, cfg.sweep);
  const std::string csv = synth::sweep_csv(result);
  write_text(cfg.out / "sweep.csv", csv);
  if (cfg.long_format) write_text(cfg.out / "sweep_trials.csv", synth::sweep_trials_csv(result));
  write_manifest(cfg.out, "sweep", doc);
  log << csv;
}

void cmd_evaluate(const EvaluateConfig& cfg, const json& doc) {
  const json fit_report = read_json(cfg.fit / "report.json");
  Preprocessing prep;
  if (fit_report.contains("preprocessing")) {
    prep.drop_volumes = fit_report["preprocessing"].value("drop_volumes", Index{0});
    prep.dedrift = fit_report["preprocessing"].value("dedrift", false);
  }
  const auto data = load_prepared(cfg.data, prep);
  const DenseMatrix basis = io::load_matrix(cfg.fit / "G.gcm");
  const Vector a_est = load_vector(cfg.fit / "a.gcm");
  Vector regressor = cfg.regressor.empty() ? preprocess_series(load_vector(cfg.data / "truth" / "s.gcm"), prep)
                                           : load_vector(cfg.regressor);
  if (basis.rows() != data.n_voxels() || a_est.size() != data.n_voxels())
    throw DimensionMismatchError("fitted run does not match the dataset voxel count");
  prepare_out(cfg.out, {cfg.data, cfg.fit});

  std::vector<eval::BetaMap> maps;
  maps.reserve(data.n_subjects());
  for (const auto& x : data.subjects()) maps.push_back(eval::glm_beta(x, regressor));
  const eval::BetaMap original = eval::average_beta_map(maps);
  // The GLM is linear in the data, so the beta map of G G^T X_k is G G^T times the original map.
  eval::BetaMap denoised = original;
  denoised.values = basis * (basis.transpose() * original.values);

  const auto mask_orig = eval::top_fraction_mask(original.values, cfg.fraction);
  const auto mask_den = eval::top_fraction_mask(denoised.values, cfg.fraction);
  const auto mask_prop = eval::top_fraction_mask(a_est, cfg.fraction);

  io::save_matrix(column(original.values), cfg.out / "beta_original.gcm", io::MatrixFormat::binary);
  io::save_matrix(column(denoised.values), cfg.out / "beta_denoised.gcm", io::MatrixFormat::binary);
  write_text(cfg.out / "mask_glm_original.txt", eval::mask_text(mask_orig));
  write_text(cfg.out / "mask_glm_denoised.txt", eval::mask_text(mask_den));
  write_text(cfg.out / "mask_proposed.txt", eval::mask_text(mask_prop));

  auto pct = [](std::initializer_list<eval::VoxelMask> ms) {
    const std::vector<eval::VoxelMask> v(ms);
    return eval::overlap_percentage(v);
  };
  std::ostringstream csv;
  csv.precision(17);
  csv << "map_pair,percent\n";
  csv << "glm_original&proposed," << pct({mask_orig, mask_prop}) << "\n";
  csv << "glm_original&glm_denoised," << pct({mask_orig, mask_den}) << "\n";
  csv << "glm_denoised&proposed," << pct({mask_den, mask_prop}) << "\n";
  csv << "all," << pct({mask_orig, mask_den, mask_prop}) << "\n";
  write_text(cfg.out / "overlap.csv", csv.str());
  write_manifest(cfg.out, "evaluate", doc);
}

namespace {

enum class Kind { integer, unsigned_integer, number, text, number_or_inf };

// Collects explicitly given flags into a JSON object of overrides.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  void add(const std::string& flag, const std::string& key, Kind kind, const std::string& help) {
    auto* opt = app_->add_option(flag, values_[key], help);
    entries_.push_back({opt, key, kind, false});
  }

  void add_flag(const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app_->add_flag(flag, help);
    entries_.push_back({opt, key, Kind::text, true});
  }

  json overrides() const {
    json out = json::object();
    for (const auto& e : entries_) {
      if (e.opt->count() == 0) continue;
      if (e.is_flag) {
        out[e.key] = true;
        continue;
      }
      const std::string& v = values_.at(e.key);
      try {
        switch (e.kind) {
          case Kind::integer:
            out[e.key] = std::stoll(v);
            break;
          case Kind::unsigned_integer:
            out[e.key] = std::stoull(v);
            break;
          case Kind::number:
            out[e.key] = std::stod(v);
            break;
          case Kind::number_or_inf:
            out[e.key] = (v == "inf" || v == "+inf") ? json("inf") : json(std::stod(v));
            break;
          case Kind::text:
            out[e.key] = v;
            break;
        }
      } catch (const std::logic_error&) {
        throw ValidationError("invalid value '" + v + "' for " + e.opt->get_name());
      }
    }
    return out;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    Kind kind;
    bool is_flag;
  };
  CLI::App* app_;
  std::map<std::string, std::string> values_;
  std::vector<Entry> entries_;
};

void add_common(FlagSet& f) {
  f.add("--config", "__config", Kind::text, "JSON configuration file; flags override its values");
  f.add("--seed", "seed", Kind::unsigned_integer, "random seed");
  f.add("--threads", "threads", Kind::integer, "worker threads");
  f.add("--out", "out", Kind::text, "output directory");
  f.add("--rel-tol", "rel_tol", Kind::number, "relative singular-value truncation");
}

void add_synth(FlagSet& f) {
  f.add("--voxels", "n_voxels", Kind::integer, "N");
  f.add("--timepoints", "n_timepoints", Kind::integer, "M");
  f.add("--subjects", "n_subjects", Kind::integer, "K");
  f.add("--common-rank", "common_rank", Kind::integer, "R (rank of the common spatial subspace)");
  f.add("--c-ratio", "c_ratio", Kind::number, "structured/unstructured noise power ratio");
}

void add_prep(FlagSet& f) {
  f.add("--drop-volumes", "drop_volumes", Kind::integer, "drop this many initial time points");
  f.add_flag("--dedrift", "dedrift", "remove per-voxel mean and linear trend");
}

void add_ao(FlagSet& f) {
  f.add("--n-inits", "n_inits", Kind::integer, "random starts per sign of g");
  f.add("--max-iters", "max_iters", Kind::integer, "iteration cap per start");
  f.add("--conv-tol", "conv_tol", Kind::number, "relative fit decrease to stop");
}

json merged(const FlagSet& flags) {
  json over = flags.overrides();
  json doc = json::object();
  if (over.contains("__config")) {
    doc = read_json(over["__config"].get<std::string>());
    if (!doc.is_object()) throw ValidationError("configuration file must hold a JSON object");
    over.erase("__config");
  }
  for (auto it = over.begin(); it != over.end(); ++it) doc[it.key()] = it.value();
  return doc;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage MAX-VAR gCCA for multi-subject task fMRI"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FMRIGCCA_VERSION);

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset directory");
  FlagSet gen_flags(gen);
  add_common(gen_flags);
  add_synth(gen_flags);
  gen_flags.add("--snr-db", "snr_db", Kind::number_or_inf, "SNR in dB (inf: noiseless)");

  auto* fit = app.add_subcommand("fit", "run the two-stage estimator on a dataset directory");
  FlagSet fit_flags(fit);
  add_common(fit_flags);
  add_prep(fit_flags);
  add_ao(fit_flags);
  fit_flags.add("--data", "data", Kind::text, "dataset directory");
  fit_flags.add("--rank", "rank", Kind::integer, "common spatial subspace dimension R");
  fit_flags.add("--variant", "variant", Kind::text, "m1, m2 (default) or both");
  fit_flags.add("--route", "route", Kind::text, "auto (default), direct or compressed");

  auto* prof = app.add_subcommand("rank-profile", "split-half subspace gap profiles");
  FlagSet prof_flags(prof);
  add_common(prof_flags);
  add_prep(prof_flags);
  prof_flags.add("--data", "data", Kind::text, "dataset directory");
  prof_flags.add("--kind", "kind", Kind::text, "spatial (default), temporal or both");
  prof_flags.add("--ranks", "ranks", Kind::text, "hypothesized spatial ranks, e.g. 1:12");
  prof_flags.add("--spatial-rank", "spatial_rank", Kind::integer, "stage-one rank for the temporal profile");
  prof_flags.add("--temporal-ranks", "temporal_ranks", Kind::text, "hypothesized temporal ranks");
  prof_flags.add("--partitions", "partitions", Kind::integer, "random subject partitions");
  prof_flags.add("--threshold", "threshold", Kind::number, "gap threshold for the advisory rank choice");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo SNR sweep on synthetic data");
  FlagSet sweep_flags(sweep);
  add_common(sweep_flags);
  add_synth(sweep_flags);
  sweep_flags.add("--trials", "trials", Kind::integer, "Monte-Carlo trials");
  add_ao(sweep_flags);
  sweep_flags.add("--snr-grid", "snr_grid", Kind::text, "comma-separated SNR values in dB; inf allowed");
  sweep_flags.add_flag("--long", "long", "also write per-trial long-format rows");

  auto* evaluate = app.add_subcommand("evaluate", "GLM beta maps and top-fraction overlaps");
  FlagSet eval_flags(evaluate);
  add_common(eval_flags);
  eval_flags.add("--data", "data", Kind::text, "dataset directory");
  eval_flags.add("--fit", "fit", Kind::text, "output directory of a fit run");
  eval_flags.add("--regressor", "regressor", Kind::text, "regressor vector (.gcm or .csv); default truth/s.gcm");
  eval_flags.add("--fraction", "fraction", Kind::number, "top fraction of voxels per mask");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code_for(ErrorKind::validation);
  }

  try {
    if (gen->parsed()) {
      const json doc = merged(gen_flags);
      cmd_generate(parse_generate(doc), doc);
    } else if (fit->parsed()) {
      const json doc = merged(fit_flags);
      cmd_fit(parse_fit(doc), doc);
    } else if (prof->parsed()) {
      const json doc = merged(prof_flags);
      cmd_rank_profile(parse_rank_profile(doc), doc, out);
    } else if (sweep->parsed()) {
      const json doc = merged(sweep_flags);
      cmd_sweep(parse_sweep(doc), doc, out);
    } else if (evaluate->parsed()) {
      const json doc = merged(eval_flags);
      cmd_evaluate(parse_evaluate(doc), doc);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::io);
  }
  return 0;
}

}  // namespace fmrigcca::cli
