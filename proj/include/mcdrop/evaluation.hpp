#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcdrop/dropout.hpp"
#include "mcdrop/error.hpp"
#include "mcdrop/inference.hpp"
#include "mcdrop/model.hpp"
#include "mcdrop/mutagenesis.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/stats.hpp"
#include "mcdrop/tokenizer.hpp"
#include "mcdrop/weights_io.hpp"

namespace mcdrop {

inline const std::vector<double>& default_rate_grid() {
  static const std::vector<double> grid{0.0, 0.05, 0.1, 0.2, 0.3, 0.5};
  return grid;
}

struct EvalConfig {
  std::vector<double> rates = default_rate_grid();
  double depth_fraction = 0.0;
  MCConfig mc;

  // Rates must be distinct and lie in [0, 1). A sweep additionally needs the
  // 0.0 baseline; single-rate evaluation does not.
  void validate(bool require_baseline) const {
    if (rates.empty()) throw ConfigError("at least one dropout rate is required");
    std::set<double> seen;
    for (double r : rates) {
      validate_rate(r);
      if (!seen.insert(r).second) throw ConfigError("dropout rates must be distinct");
    }
    if (require_baseline && !seen.contains(0.0))
      throw ConfigError("the rate grid must contain the 0.0 baseline");
    InjectionPlan{0.0, depth_fraction, std::nullopt}.validate();
    mc.validate();
  }
};

struct FamilyResult {
  std::string family_id;
  double srcc = 0.0;
  std::size_t n_mutants = 0;
};

struct SkippedFamily {
  std::string family_id;
  std::string reason;
};

struct RateResult {
  double rate = 0.0;
  std::vector<FamilyResult> families;  // sorted by family_id
  std::vector<SkippedFamily> skipped;  // sorted by family_id
  std::optional<double> median;        // absent when every family skipped
};

struct Provenance {
  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string timestamp;
};

struct SweepReport {
  std::vector<RateResult> rates;  // in grid order
  Provenance provenance;
};

// Seed for the MC estimate of record `index` in `family_id`. It depends on
// the family name (not its position in the input) and not on the rate, so
// every rate sees the same sample streams.
inline std::uint64_t record_seed(std::uint64_t base_seed, const std::string& family_id, std::size_t index) {
  return child_seed(child_seed(base_seed, fnv1a64(family_id)), index);
}

// ŷ for every record of the family, in record order.
inline std::vector<double> score_family(const Parameters& params, const FamilyDataset& family,
                                        const InjectionPlan& plan, const MCConfig& mc,
                                        std::size_t threads = 1) {
  plan.validate();
  mc.validate();
  if (family.wildtype.size() > params.config.max_len)
    throw SequenceTooLong(family.wildtype.size(), params.config.max_len);
  std::vector<double> scores(family.records.size());
  parallel_for(family.records.size(), threads, [&](std::size_t i) {
    const TokenSequence tokens = encode(mutant_sequence(family, family.records[i]));
    MCConfig record_mc{mc.n_samples, record_seed(mc.base_seed, family.family_id, i)};
    scores[i] = score_sequence(params, tokens, plan, record_mc);
  });
  return scores;
}

inline FamilyResult evaluate_family(const Parameters& params, const FamilyDataset& family,
                                    const InjectionPlan& plan, const MCConfig& mc,
                                    std::size_t threads = 1) {
  const std::vector<double> predicted = score_family(params, family, plan, mc, threads);
  std::vector<double> measured;
  measured.reserve(family.records.size());
  for (const auto& r : family.records) measured.push_back(r.fitness);
  return {family.family_id, spearman(predicted, measured), family.records.size()};
}

// Families that raise a DataError (degenerate scores, over-long wildtype, ...)
// are listed as skipped for that rate and left out of its median. Throws
// NothingEvaluable when no family produced a result at any rate.
inline SweepReport run_sweep(const Parameters& params, const EvalConfig& config,
                             const std::vector<FamilyDataset>& families, std::size_t threads = 1) {
  config.validate(/*require_baseline=*/false);
  if (families.empty()) throw NothingEvaluable("no families to evaluate");

  std::vector<std::size_t> order(families.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return families[a].family_id < families[b].family_id;
  });

  SweepReport report;
  report.provenance.seed = config.mc.base_seed;
  bool any_result = false;
  for (double rate : config.rates) {
    const InjectionPlan plan{rate, config.depth_fraction, std::nullopt};
    RateResult rr;
    rr.rate = rate;
    for (std::size_t idx : order) {
      const FamilyDataset& family = families[idx];
      try {
        rr.families.push_back(evaluate_family(params, family, plan, config.mc, threads));
      } catch (const DataError& e) {
        rr.skipped.push_back({family.family_id, e.what()});
      }
    }
    if (!rr.families.empty()) {
      std::vector<double> values;
      for (const auto& f : rr.families) values.push_back(f.srcc);
      rr.median = median(values);
      any_result = true;
    }
    report.rates.push_back(std::move(rr));
  }
  if (!any_result) throw NothingEvaluable("every family was skipped");
  return report;
}

// ---- synthetic benchmark ---------------------------------------------------

struct SyntheticSpec {
  std::size_t n_families = 10;
  std::size_t mutants_per_family = 100;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  std::size_t min_length = 50;
  std::size_t max_length = 200;

  void validate() const {
    if (n_families == 0) throw ConfigError("n_families must be positive");
    if (mutants_per_family < 2) throw ConfigError("mutants_per_family must be at least 2");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise_sd must be finite and >= 0");
    if (min_length == 0 || min_length > max_length) throw ConfigError("invalid wildtype length range");
  }
};

namespace detail {

inline char random_residue(Rng& rng) {
  return kCanonicalResidues[rng.uniform_int(0, kCanonicalResidues.size() - 1)];
}

inline char random_substitute(Rng& rng, char from) {
  char to = from;
  while (to == from) to = random_residue(rng);
  return to;
}

}  // namespace detail

// Random wildtypes over the 20 canonical residues with unique single and
// double substitution codes. Labels are the teacher's deterministic score
// of each mutant plus N(0, noise_sd^2) noise. Family f draws from its own
// stream child_seed(seed, f), so output does not depend on thread count.
inline std::vector<FamilyDataset> generate_synthetic_benchmark(const Parameters& teacher,
                                                               const SyntheticSpec& spec,
                                                               std::size_t threads = 1) {
  spec.validate();
  const std::size_t max_len = std::min(spec.max_length, teacher.config.max_len);
  if (spec.min_length > max_len)
    throw ConfigError("teacher max_len " + std::to_string(teacher.config.max_len) +
                      " is below the minimum wildtype length");

  std::vector<FamilyDataset> families(spec.n_families);
  for (std::size_t f = 0; f < spec.n_families; ++f) {
    Rng rng(child_seed(spec.seed, f));
    FamilyDataset& ds = families[f];
    ds.family_id = "SYN" + std::string(f < 10 ? "00" : f < 100 ? "0" : "") + std::to_string(f);
    const std::size_t length = rng.uniform_int(spec.min_length, max_len);
    ds.wildtype.resize(length);
    for (char& c : ds.wildtype) c = detail::random_residue(rng);

    if (spec.mutants_per_family > 19 * length)
      throw ConfigError("mutants_per_family exceeds the distinct codes available for a wildtype");
    std::set<std::string> codes;
    while (ds.records.size() < spec.mutants_per_family) {
      const std::size_t n_mut = rng.uniform_int(1, 2);
      std::vector<Mutation> muts;
      const std::size_t p1 = rng.uniform_int(1, length);
      muts.push_back({p1, ds.wildtype[p1 - 1], detail::random_substitute(rng, ds.wildtype[p1 - 1])});
      if (n_mut == 2) {
        std::size_t p2 = p1;
        while (p2 == p1) p2 = rng.uniform_int(1, length);
        muts.push_back({p2, ds.wildtype[p2 - 1], detail::random_substitute(rng, ds.wildtype[p2 - 1])});
        std::sort(muts.begin(), muts.end(),
                  [](const Mutation& a, const Mutation& b) { return a.position < b.position; });
      }
      std::string code = format_mutation_code(muts);
      if (codes.insert(code).second) ds.records.push_back({std::move(code), 0.0});
    }
  }

  // Teacher labels: all (family, record) pairs scored in one parallel pass.
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t f = 0; f < families.size(); ++f)
    for (std::size_t i = 0; i < families[f].records.size(); ++i) jobs.push_back({f, i});
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    auto [f, i] = jobs[j];
    FamilyDataset& ds = families[f];
    ds.records[i].fitness = score_deterministic(teacher, encode(mutant_sequence(ds, ds.records[i])));
  });

  if (spec.noise_sd > 0.0) {
    for (std::size_t f = 0; f < families.size(); ++f) {
      Rng noise(child_seed(child_seed(spec.seed, f), 0x6e6f697365ULL));
      for (auto& r : families[f].records) r.fitness += spec.noise_sd * noise.normal();
    }
  }
  return families;
}

// <dir>/<family_id>.csv and <dir>/<family_id>.fasta for each family.
inline void write_benchmark(const std::vector<FamilyDataset>& families, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (const auto& ds : families) {
    write_family_csv(ds, dir / (ds.family_id + ".csv"));
    write_fasta(dir / (ds.family_id + ".fasta"), {{ds.family_id, ds.wildtype}});
  }
}

}  // namespace mcdrop
