#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.
//
// Exit codes: 0 success, 2 usage/config, 3 I/O, 4 data validation,
// 5 nothing evaluable.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcdrop/mcdrop.hpp"

namespace mcdrop::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kData = 4,
  kNothingEvaluable = 5,
};

namespace detail {

namespace fs = std::filesystem;

struct EvalArgs {
  std::string model;
  std::string families;
  std::string wildtype;
  std::vector<double> rates;
  double dropout = kDefaultDropoutRate;
  double depth_fraction = 0.0;
  std::size_t samples = kDefaultMcSamples;
  std::uint64_t seed = 0;
  std::string out_json;
  std::string out_csv;
  bool lenient = false;
};

inline std::vector<fs::path> family_files(const fs::path& where) {
  if (!fs::exists(where)) throw IoError("'" + where.string() + "' does not exist");
  if (fs::is_regular_file(where)) return {where};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(where))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Loads every family it can; failures are reported on `err` and skipped.
inline std::vector<FamilyDataset> load_families(const EvalArgs& a, std::ostream& err) {
  std::map<std::string, std::string> wildtypes;
  if (!a.wildtype.empty())
    for (auto& r : read_fasta(a.wildtype)) wildtypes[r.header] = r.sequence;

  std::vector<FamilyDataset> out;
  for (const auto& path : family_files(a.families)) {
    LoadOptions opts;
    opts.lenient = a.lenient;
    if (!wildtypes.empty()) {
      if (auto it = wildtypes.find(path.stem().string()); it != wildtypes.end())
        opts.wildtype = it->second;
      else if (wildtypes.size() == 1)
        opts.wildtype = wildtypes.begin()->second;
    }
    try {
      out.push_back(load_family_csv(path, opts));
      if (out.back().skipped_rows > 0)
        err << "family " << out.back().family_id << ": skipped " << out.back().skipped_rows
            << " mismatching rows\n";
    } catch (const DataError& e) {
      err << "skipping " << path.filename().string() << ": " << e.what() << "\n";
    }
  }
  return out;
}

inline void print_median_table(const SweepReport& report, std::ostream& out) {
  out << "rate\tmedian_srcc\tn_families\tn_skipped\n";
  for (const auto& rr : report.rates) {
    out << text::format_double(rr.rate) << '\t' << (rr.median ? text::format_double(*rr.median) : "nan")
        << '\t' << rr.families.size() << '\t' << rr.skipped.size() << '\n';
  }
}

inline int run_evaluation(const EvalArgs& a, bool sweep, std::ostream& out, std::ostream& err) {
  EvalConfig config;
  config.rates = sweep ? (a.rates.empty() ? default_rate_grid() : a.rates) : std::vector<double>{a.dropout};
  config.depth_fraction = a.depth_fraction;
  config.mc = {a.samples, a.seed};
  config.validate(/*require_baseline=*/sweep);

  const Parameters params = load_weights(a.model);
  const nlohmann::json canonical = eval_config_to_json(params.config, config);
  Provenance prov{kVersion, a.seed, config_hash(canonical), utc_timestamp()};
  err << provenance_line(prov) << "\n";

  const auto families = load_families(a, err);
  SweepReport report = run_sweep(params, config, families, default_thread_count());
  report.provenance = prov;
  for (const auto& rr : report.rates)
    for (const auto& s : rr.skipped)
      err << "rate " << text::format_double(rr.rate) << ": skipped " << s.family_id << ": " << s.reason << "\n";

  if (!a.out_json.empty()) write_text_file(a.out_json, report_to_json(report, canonical).dump(2) + "\n");
  if (!a.out_csv.empty()) write_text_file(a.out_csv, report_to_csv(report));
  print_median_table(report, out);
  return kOk;
}

inline std::string read_sequence_arg(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) {
    const auto records = read_fasta(arg);
    if (records.empty() || records.front().sequence.empty())
      throw DataError("no sequence found in '" + arg + "'");
    return records.front().sequence;
  }
  return arg;
}

// Maps library exceptions onto exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NothingEvaluable& e) {
    err << "error: " << e.what() << "\n";
    return kNothingEvaluable;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  using detail::EvalArgs;

  CLI::App app{"Zero-shot fitness scoring with inference-time Monte-Carlo dropout", "mcdrop"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // init-model
  std::string init_config, init_out;
  std::uint64_t init_seed = 0;
  auto* init = app.add_subcommand("init-model", "Create a randomly initialized model weight file");
  init->add_option("--config", init_config, "Model config JSON file (defaults used when omitted)");
  init->add_option("--seed", init_seed, "Initialization seed");
  init->add_option("--out", init_out, "Output weight file")->required();

  // score
  std::string score_model, score_seq;
  double score_dropout = kDefaultDropoutRate, score_depth = 0.0;
  std::size_t score_samples = kDefaultMcSamples;
  std::uint64_t score_seed = 0;
  auto* sc = app.add_subcommand("score", "Score one sequence");
  sc->add_option("--model", score_model, "Weight file")->required();
  sc->add_option("--seq", score_seq, "Amino-acid sequence or FASTA file")->required();
  sc->add_option("--dropout", score_dropout, "Dropout rate p");
  sc->add_option("--depth-fraction", score_depth, "Fraction of leading layers that also get dropout");
  sc->add_option("--samples", score_samples, "Monte-Carlo samples N");
  sc->add_option("--seed", score_seed, "Base seed");

  // eval / sweep
  EvalArgs eval_args, sweep_args;
  auto add_eval_options = [](CLI::App* cmd, EvalArgs& a) {
    cmd->add_option("--model", a.model, "Weight file")->required();
    cmd->add_option("--families", a.families, "Directory of family CSVs (or a single CSV)")->required();
    cmd->add_option("--wildtype", a.wildtype, "FASTA of wildtypes keyed by family id");
    cmd->add_option("--depth-fraction", a.depth_fraction, "Fraction of leading layers that also get dropout");
    cmd->add_option("--samples", a.samples, "Monte-Carlo samples N");
    cmd->add_option("--seed", a.seed, "Base seed");
    cmd->add_option("--out", a.out_json, "Write the JSON report here");
    cmd->add_option("--csv", a.out_csv, "Write the flat CSV report here");
    cmd->add_flag("--lenient", a.lenient, "Skip rows that do not match the wildtype");
  };
  auto* ev = app.add_subcommand("eval", "Evaluate families at one dropout rate");
  add_eval_options(ev, eval_args);
  ev->add_option("--dropout", eval_args.dropout, "Dropout rate p");
  auto* sw = app.add_subcommand("sweep", "Evaluate families over a grid of dropout rates");
  add_eval_options(sw, sweep_args);
  sw->add_option("--rates", sweep_args.rates, "Comma-separated dropout rates")->delimiter(',');

  // gen-synthetic
  std::string gen_teacher, gen_out;
  SyntheticSpec gen_spec;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic benchmark labelled by a teacher model");
  gen->add_option("--teacher", gen_teacher, "Teacher weight file")->required();
  gen->add_option("--families", gen_spec.n_families, "Number of families");
  gen->add_option("--mutants", gen_spec.mutants_per_family, "Mutants per family");
  gen->add_option("--noise", gen_spec.noise_sd, "Label noise standard deviation");
  gen->add_option("--seed", gen_spec.seed, "Seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  if (*init) {
    return detail::guarded(err, [&] {
      ModelConfig config;
      if (!init_config.empty()) config = parse_config_text(read_text_file(init_config));
      config.validate();
      err << "mcdrop " << kVersion << " seed=" << init_seed
          << " config_hash=" << config_hash(config_to_json(config)) << "\n";
      const Parameters params = init_random(config, init_seed);
      save_weights(params, init_out);
      std::size_t n_params = 0;
      for_each_tensor(params, [&](const TensorView<const double>& t) { n_params += t.element_count(); });
      out << nlohmann::json{{"config", config_to_json(config)},
                            {"parameters", n_params},
                            {"seed", init_seed},
                            {"path", init_out}}
                 .dump()
          << "\n";
      return int{kOk};
    });
  }

  if (*sc) {
    return detail::guarded(err, [&] {
      const InjectionPlan plan{score_dropout, score_depth, std::nullopt};
      plan.validate();
      const MCConfig mc{score_dropout == 0.0 ? 1 : score_samples, score_seed};
      mc.validate();
      const Parameters params = load_weights(score_model);
      err << "mcdrop " << kVersion << " seed=" << score_seed
          << " config_hash=" << config_hash(config_to_json(params.config)) << "\n";
      const TokenSequence tokens = encode(detail::read_sequence_arg(score_seq));
      out << text::format_double(score_sequence(params, tokens, plan, mc, default_thread_count())) << "\n";
      return int{kOk};
    });
  }

  if (*ev) return detail::guarded(err, [&] { return detail::run_evaluation(eval_args, false, out, err); });
  if (*sw) return detail::guarded(err, [&] { return detail::run_evaluation(sweep_args, true, out, err); });

  if (*gen) {
    return detail::guarded(err, [&] {
      gen_spec.validate();
      const Parameters teacher = load_weights(gen_teacher);
      err << "mcdrop " << kVersion << " seed=" << gen_spec.seed
          << " config_hash=" << config_hash(config_to_json(teacher.config)) << "\n";
      const auto families = generate_synthetic_benchmark(teacher, gen_spec, default_thread_count());
      write_benchmark(families, gen_out);
      out << "family_id\tlength\tn_mutants\n";
      for (const auto& f : families)
        out << f.family_id << '\t' << f.wildtype.size() << '\t' << f.records.size() << '\n';
      return int{kOk};
    });
  }
  return kUsage;
}

}  // namespace mcdrop::cli
