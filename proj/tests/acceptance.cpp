// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "test_support.hpp"

using namespace mcdrop;
namespace t = mcdrop::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "mcdrop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig random_config(std::mt19937_64& gen) {
  ModelConfig c;
  c.n_layers = 1 + gen() % 4;
  c.n_heads = std::size_t{1} << (gen() % 3);
  c.d_model = c.n_heads * (4 + 4 * (gen() % 4));
  c.d_ff = c.d_model * (1 + gen() % 4);
  c.max_len = 128;
  return c;
}

double max_row_logsumexp(const Matrix& m, bool absolute) {
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Matrix row = m.row(i);
    const double v = static_cast<double>(t::logsumexp_oracle(row.data(), static_cast<std::size_t>(row.cols())));
    worst = std::max(worst, absolute ? std::abs(v) : v);
  }
  return worst;
}

// 1. p = 0 reduces to the classical proxy.
Outcome zero_dropout_equivalence() {
  Outcome o;
  std::mt19937_64 gen(101);
  const auto start = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ModelConfig c = random_config(gen);
    const auto params = init_random(c, gen());
    const std::size_t len = 5 + gen() % 100;
    const auto tokens = encode(t::random_protein(gen, len));
    const double classical = score(forward(params, tokens));
    const double mc = score_sequence(params, tokens, {0.0, 1.0, std::nullopt}, {100, gen()});
    const double tol = 1e-6 * static_cast<double>(len + 2) * static_cast<double>(c.n_t);
    worst = std::max(worst, std::abs(mc - classical) / tol);
    o.check(std::abs(mc - classical) <= tol, "trial " + std::to_string(trial) + " differs");
  }
  const double elapsed = seconds_since(start);
  o.check(elapsed < 10.0, "runtime " + text::format_double(elapsed) + " s");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("worst |diff|/tol = ") + text::format_double(worst) +
              ", " + text::format_double(elapsed) + " s";
  return o;
}

// 2. Single-pass rows are normalized; MC-averaged rows are subnormalized.
Outcome row_normalization() {
  Outcome o;
  std::mt19937_64 gen(202);
  double worst_single = 0.0, worst_avg = -1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelConfig c = random_config(gen);
    const auto params = init_random(c, gen());
    const auto tokens = encode(t::random_protein(gen, 1 + gen() % 80));
    const double rate = std::uniform_real_distribution<double>(0.0, 0.9)(gen);
    const InjectionPlan plan{rate, static_cast<double>(gen() % 5) / 4.0, std::nullopt};
    Rng rng(gen());
    worst_single = std::max(worst_single, max_row_logsumexp(forward(params, tokens, plan, rng).values, true));
    if (trial % 5 == 0) {
      const auto avg = mc_average_logprobs(params, tokens, plan, {8, gen()});
      worst_avg = std::max(worst_avg, max_row_logsumexp(avg.values, false));
    }
  }
  o.check(worst_single <= 1e-6, "single-pass |lse| " + text::format_double(worst_single));
  o.check(worst_avg <= 1e-9, "averaged lse " + text::format_double(worst_avg));
  if (o.pass)
    o.detail = "max |lse| single " + text::format_double(worst_single) + ", max lse averaged " +
               text::format_double(worst_avg);
  return o;
}

// 3. Inverted dropout is unbiased.
Outcome dropout_unbiasedness() {
  Outcome o;
  std::mt19937_64 gen(303);
  std::vector<double> v(64);
  for (double& x : v) x = std::uniform_real_distribution<double>(0.5, 2.0)(gen) * (gen() % 2 ? 1.0 : -1.0);
  double worst = 0.0;
  for (double p : {0.1, 0.3, 0.5}) {
    Rng rng(child_seed(303, static_cast<std::uint64_t>(p * 10)));
    std::vector<double> sum(v.size(), 0.0);
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      const auto masked = apply_dropout(v, p, rng);
      for (std::size_t i = 0; i < v.size(); ++i) sum[i] += masked[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double rel = std::abs(sum[i] / n - v[i]) / std::abs(v[i]);
      worst = std::max(worst, rel);
      if (rel > 0.02) o.check(false, "p=" + text::format_double(p) + " coordinate " + std::to_string(i));
    }
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("worst relative error ") + text::format_double(worst);
  return o;
}

// 4. Thread count does not change the bits; disjoint seeds differ.
Outcome mc_determinism() {
  Outcome o;
  std::mt19937_64 gen(404);
  const auto params = init_random(ModelConfig{}, 404);
  const auto tokens = encode(t::random_protein(gen, 80));
  const InjectionPlan plan{0.1, 0.5, std::nullopt};
  const std::size_t max_threads = std::max<std::size_t>(8, std::thread::hardware_concurrency());
  const auto serial = mc_average_logprobs(params, tokens, plan, {24, 77}, 1);
  const auto parallel = mc_average_logprobs(params, tokens, plan, {24, 77}, max_threads);
  const auto other = mc_average_logprobs(params, tokens, plan, {24, 78}, max_threads);
  const auto bytes = sizeof(double) * static_cast<std::size_t>(serial.values.size());
  o.check(std::memcmp(serial.values.data(), parallel.values.data(), bytes) == 0,
          "1 vs " + std::to_string(max_threads) + " threads differ");
  o.check(serial.values != other.values, "disjoint seeds agree");
  if (o.pass) o.detail = "1 vs " + std::to_string(max_threads) + " threads bit-identical";
  return o;
}

// 5. SRCC oracle.
Outcome srcc_oracle() {
  Outcome o;
  std::vector<double> identity{1, 2, 3, 4, 5, 6}, perm = identity;
  int count = 0;
  do {
    ++count;
    if (std::abs(spearman(identity, perm) - t::classic_spearman(identity, perm)) > 1e-12)
      o.check(false, "permutation " + std::to_string(count));
  } while (std::next_permutation(perm.begin(), perm.end()));
  o.check(count == 720, "visited " + std::to_string(count) + " permutations");

  const double tied = spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 3, 2, 4});
  o.check(std::abs(tied - 0.8) <= 1e-12,
          "tied example returned " + text::format_double(tied) + ", expected 0.8 (average-rank oracle gives " +
              text::format_double(t::spearman_oracle({1, 2, 2, 3}, {1, 3, 2, 4})) + ")");

  std::mt19937_64 gen(505);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::vector<std::function<double(double)>> transforms{
      [](double v) { return std::exp(v); }, [](double v) { return 3.0 * v + 1.0; },
      [](double v) { return v * v * v; }, [](double v) { return std::atan(v); }};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + gen() % 50;
    std::vector<double> x(n), y(n), fx(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = u(gen), y[i] = u(gen);
    const auto& f = transforms[static_cast<std::size_t>(trial) % transforms.size()];
    std::transform(x.begin(), x.end(), fx.begin(), f);
    if (spearman(x, y) != spearman(fx, y)) o.check(false, "monotone case " + std::to_string(trial));
  }
  return o;
}

// 6. The uniform row uniquely maximizes the score.
Outcome uniform_maximization() {
  Outcome o;
  const double bound = -27.0 * std::log(27.0);
  std::mt19937_64 gen(606);
  std::exponential_distribution<double> expo(1.0);
  double closest = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix row(1, 27);
    double z = 0.0;
    for (Eigen::Index j = 0; j < 27; ++j) z += (row(0, j) = expo(gen));
    row = (row / z).array().log().matrix();
    const double s = score(LogProbMatrix{row});
    closest = std::max(closest, s);
    if (!(s < bound)) o.check(false, "row " + std::to_string(trial) + " reached the bound");
  }
  const double uniform = score(LogProbMatrix{Matrix::Constant(1, 27, -std::log(27.0))});
  o.check(std::abs(uniform - bound) <= 1e-9, "uniform row gives " + text::format_double(uniform));
  if (o.pass) o.detail = "largest random score " + text::format_double(closest) + " < " + text::format_double(bound);
  return o;
}

// 7. Teacher-labelled families are recovered exactly at p = 0.
Outcome synthetic_end_to_end(const fs::path& work) {
  Outcome o;
  const auto start = Clock::now();
  const auto model = (work / "teacher.bin").string();
  const auto bench = (work / "bench7").string();
  const auto report = (work / "eval7.json").string();
  o.check(run_cli({"init-model", "--seed", "7", "--out", model}) == 0, "init-model failed");
  o.check(run_cli({"gen-synthetic", "--teacher", model, "--families", "10", "--mutants", "100", "--noise", "0",
                   "--seed", "7", "--out", bench}) == 0,
          "gen-synthetic failed");
  o.check(run_cli({"eval", "--model", model, "--families", bench, "--dropout", "0", "--out", report}) == 0,
          "eval failed");
  const double elapsed = seconds_since(start);
  if (!o.pass) return o;
  const auto json = nlohmann::json::parse(read_text_file(report));
  const auto& fams = json["rates"][0]["families"];
  o.check(fams.size() == 10, std::to_string(fams.size()) + " families evaluated");
  for (const auto& f : fams) {
    o.check(f["n_mutants"] == 100, f["family_id"].get<std::string>() + " has wrong mutant count");
    if (f["srcc"].get<double>() != 1.0)
      o.check(false, f["family_id"].get<std::string>() + " srcc " + text::format_double(f["srcc"].get<double>()));
  }
  o.check(elapsed < 60.0, "runtime " + text::format_double(elapsed) + " s");
  if (o.pass) o.detail = "10/10 families at SRCC 1.0 in " + text::format_double(elapsed) + " s";
  return o;
}

// 8. MC standard deviation decays roughly as 1/sqrt(N).
Outcome variance_decay() {
  Outcome o;
  const auto teacher = init_random(ModelConfig{}, 8);
  SyntheticSpec spec;
  spec.n_families = 1;
  spec.mutants_per_family = 10;
  spec.seed = 8;
  const auto family = generate_synthetic_benchmark(teacher, spec).front();
  const auto tokens = encode(mutant_sequence(family, family.records.front()));
  const InjectionPlan plan{0.1, 0.0, std::nullopt};
  const std::size_t threads = default_thread_count();
  auto spread = [&](std::size_t n, std::uint64_t salt) {
    std::vector<double> estimates;
    for (std::uint64_t r = 0; r < 32; ++r)
      estimates.push_back(score_sequence(teacher, tokens, plan, {n, child_seed(salt, r)}, threads));
    return sample_stddev(estimates);
  };
  const double ratio = spread(64, 64) / spread(16, 16);
  o.check(ratio >= 0.35 && ratio <= 0.7, "ratio " + text::format_double(ratio));
  if (o.pass) o.detail = "std ratio N=64/N=16 = " + text::format_double(ratio);
  return o;
}

// 9. Full sweep: runtime, seed-invariant baseline, CSV round trip.
constexpr int kSweepMutants = 32;

Outcome sweep_harness(const fs::path& work) {
  Outcome o;
  const auto model = (work / "teacher.bin").string();
  const auto bench = (work / "bench9").string();
  if (!fs::exists(model)) o.check(run_cli({"init-model", "--seed", "7", "--out", model}) == 0, "init-model failed");
  o.check(run_cli({"gen-synthetic", "--teacher", model, "--families", "10", "--mutants",
                   std::to_string(kSweepMutants), "--noise", "0.5", "--seed", "9", "--out", bench}) == 0,
          "gen-synthetic failed");
  if (!o.pass) return o;

  const auto start = Clock::now();
  const auto json_a = work / "sweep_a.json", csv_a = work / "sweep_a.csv";
  o.check(run_cli({"sweep", "--model", model, "--families", bench, "--rates", "0.0,0.05,0.1,0.2,0.3,0.5",
                   "--samples", "25", "--seed", "1", "--out", json_a.string(), "--csv", csv_a.string()}) == 0,
          "sweep failed");
  const double elapsed = seconds_since(start);
  if (!o.pass) return o;
  o.check(elapsed < 300.0, "runtime " + text::format_double(elapsed) + " s");

  const auto a = nlohmann::json::parse(read_text_file(json_a));
  o.check(a["rates"].size() == 6, "expected 6 rate rows");
  o.check(a.contains("provenance") && a["provenance"].contains("seed") && a["provenance"].contains("config_hash") &&
              a["provenance"].contains("timestamp"),
          "provenance block incomplete");
  const auto baseline = a["rates"][0];
  o.check(baseline["rate"] == 0.0, "first row is not the baseline");
  for (const std::string seed : {"2", "987654321"}) {
    const auto json_b = work / ("sweep_b" + seed + ".json");
    o.check(run_cli({"sweep", "--model", model, "--families", bench, "--rates", "0.0", "--samples", "25",
                     "--seed", seed, "--out", json_b.string()}) == 0,
            "baseline sweep failed");
    const auto b = nlohmann::json::parse(read_text_file(json_b));
    o.check(b["rates"][0]["median"] == baseline["median"] && b["rates"][0]["families"] == baseline["families"],
            "rate-0.0 row changed with seed " + seed);
  }

  const auto rows = parse_sweep_csv(read_text_file(csv_a));
  std::size_t expected_rows = 0;
  for (const auto& r : a["rates"]) expected_rows += r["families"].size();
  o.check(rows.size() == expected_rows, "CSV row count");
  std::size_t k = 0;
  for (const auto& r : a["rates"])
    for (const auto& f : r["families"]) {
      if (k >= rows.size()) break;
      const auto& row = rows[k++];
      if (row.rate != r["rate"].get<double>() || row.family_id != f["family_id"].get<std::string>() ||
          row.srcc != f["srcc"].get<double>() || row.n_mutants != f["n_mutants"].get<std::size_t>())
        o.check(false, "CSV row " + std::to_string(k) + " disagrees with JSON");
    }
  std::ostringstream rebuilt;
  rebuilt << kSweepCsvHeader << '\n';
  for (const auto& row : rows)
    rebuilt << text::format_double(row.rate) << ',' << row.family_id << ',' << text::format_double(row.srcc) << ','
            << row.n_mutants << '\n';
  o.check(rebuilt.str() == read_text_file(csv_a), "CSV does not re-serialize byte-identically");

  if (o.pass) {
    o.detail = "6 rates x 10 families x " + std::to_string(kSweepMutants) + " mutants, N=25 in " +
               text::format_double(elapsed) + " s; baseline median " +
               text::format_double(baseline["median"].get<double>());
  }
  return o;
}

// 10. Persistence.
Outcome persistence(const fs::path& work) {
  Outcome o;
  const auto params = init_random(ModelConfig{}, 10);
  const auto path = work / "w10.bin";
  save_weights(params, path);
  o.check(bit_identical(params, load_weights(path)), "weights do not round-trip");

  std::string bytes = read_bytes(path);
  const std::size_t mid = bytes.size() / 2;
  bytes[mid] = static_cast<char>(bytes[mid] ^ 0x10);
  const auto corrupt = work / "w10_corrupt.bin";
  std::ofstream(corrupt, std::ios::binary) << bytes;
  try {
    load_weights(corrupt);
    o.check(false, "corrupted file accepted");
  } catch (const ChecksumMismatch&) {
  } catch (const std::exception& e) {
    o.check(false, std::string("corrupted file raised ") + e.what());
  }

  SyntheticSpec spec;
  spec.n_families = 3;
  spec.mutants_per_family = 20;
  spec.noise_sd = 0.3;
  spec.seed = 10;
  const auto teacher = init_random(t::tiny_config(), 10);
  spec.max_length = 60;
  write_benchmark(generate_synthetic_benchmark(teacher, spec, 1), work / "gen_a");
  write_benchmark(generate_synthetic_benchmark(teacher, spec, 4), work / "gen_b");
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(work / "gen_a")) {
    ++files;
    if (read_bytes(entry.path()) != read_bytes(work / "gen_b" / entry.path().filename()))
      o.check(false, entry.path().filename().string() + " differs");
  }
  o.check(files == 6, std::to_string(files) + " files generated");
  if (o.pass) o.detail = "round trip exact, corruption rejected, " + std::to_string(files) + " files identical";
  return o;
}

}  // namespace

int main() {
  t::TempDir work;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"zero-dropout equivalence", zero_dropout_equivalence},
      {"row normalization", row_normalization},
      {"dropout unbiasedness", dropout_unbiasedness},
      {"MC determinism and order independence", mc_determinism},
      {"SRCC oracle", srcc_oracle},
      {"uniform maximization", uniform_maximization},
      {"synthetic end-to-end", [&] { return synthetic_end_to_end(work.path()); }},
      {"variance decay", variance_decay},
      {"sweep harness shape", [&] { return sweep_harness(work.path()); }},
      {"persistence", [&] { return persistence(work.path()); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << criteria[i].first
              << (o.detail.empty() ? "" : " (" + o.detail + ")") << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failures) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
