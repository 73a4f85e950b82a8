#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "mmce/baselines.hpp"
#include "mmce/channel.hpp"
#include "mmce/io.hpp"
#include "mmce/rng.hpp"
#include "mmce/sounding.hpp"
#include "mmce/ssd.hpp"

#if __has_include(<dlfcn.h>)
#include <dlfcn.h>
#endif

namespace mmce {

/// Pins a dynamically loaded OpenBLAS to one thread. Parallelism lives at the
/// trial level here; nested BLAS threading oversubscribes the cores and makes
/// per-call timings incomparable.
inline void limit_blas_threads()
{
#if __has_include(<dlfcn.h>)
  using SetThreads = void (*)(int);
  if (auto* f = reinterpret_cast<SetThreads>(dlsym(RTLD_DEFAULT, "openblas_set_num_threads"))) f(1);
#endif
}

enum class Algorithm { ssd, ssd_t, mf, scan, nnm_svt };

inline const char* to_string(Algorithm a)
{
  switch (a) {
    case Algorithm::ssd: return "ssd";
    case Algorithm::ssd_t: return "ssd_t";
    case Algorithm::mf: return "mf";
    case Algorithm::scan: return "scan";
    case Algorithm::nnm_svt: return "nnm_svt";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(std::string_view s)
{
  if (s == "ssd") return Algorithm::ssd;
  if (s == "ssd_t" || s == "ssd-t") return Algorithm::ssd_t;
  if (s == "mf") return Algorithm::mf;
  if (s == "scan") return Algorithm::scan;
  if (s == "nnm_svt" || s == "nnm-svt") return Algorithm::nnm_svt;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

/// Monte-Carlo experiment description. Defaults follow the standard benchmark
/// geometry (16x64 array, 2 paths, rank bound 3, 4 RF chains).
struct ExperimentConfig {
  int nr = 16;
  int nt = 64;
  int n_paths = 2;
  int d = 3;
  int n_rf = 4;
  int n_streams = 2;
  std::vector<double> snr_db_grid = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
  std::vector<int> k_grid = {100};
  int n_trials = 100;
  std::uint64_t master_seed = 1;
  std::vector<Algorithm> algorithms = {Algorithm::ssd, Algorithm::ssd_t, Algorithm::mf};
  SolverConfig solver;
  double nnm_mu = 1e-3;
  double nnm_step = 0.0;  // 0 selects 0.9 / ||A||^2 per instance
  int nnm_iters = 200;

  void validate() const
  {
    if (n_trials < 1) throw std::invalid_argument("ExperimentConfig: n_trials must be >= 1");
    if (snr_db_grid.empty() || k_grid.empty()) throw std::invalid_argument("ExperimentConfig: grids must be nonempty");
    if (algorithms.empty()) throw std::invalid_argument("ExperimentConfig: no algorithms selected");
    if (n_paths > std::min(nr, nt)) throw std::invalid_argument("ExperimentConfig: n_paths exceeds min(nr, nt)");
  }
};

/// One benchmark measurement. sample_hash fingerprints the sample vector the
/// algorithm consumed (not serialized; used to audit input sharing).
struct ResultRow {
  Algorithm algorithm = Algorithm::ssd;
  double snr_db = 0.0;
  int k_uses = 0;
  int trial = 0;
  double nmse = 0.0;  // NaN marks a failed run
  double wall_time_s = 0.0;
  int iters = 0;
  std::string stop_reason;
  std::uint64_t sample_hash = 0;
};

/// Per-trial NMSE: ||h_true - h_est||_F^2 / ||h_true||_F^2.
inline double nmse(const CMat& h_true, const CMat& h_est)
{
  if (h_true.rows() != h_est.rows() || h_true.cols() != h_est.cols())
    throw std::invalid_argument("nmse: shape mismatch");
  double const denom = h_true.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("nmse: true channel is zero");
  return (h_true - h_est).squaredNorm() / denom;
}

namespace detail {

inline std::uint64_t fnv1a_hash(const CVec& v)
{
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](std::uint64_t bits) {
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double const re = v(i).real(), im = v(i).imag();
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(re));
    std::memcpy(&bits, &re, 8);
    mix(bits);
    std::memcpy(&bits, &im, 8);
    mix(bits);
  }
  return h;
}

}  // namespace detail

/// Seed for one Monte-Carlo cell, derived from the master seed and the grid
/// indices: seed_combine applied to snr index, then k index, then trial.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t snr_idx, std::size_t k_idx, int trial)
{
  return seed_combine(seed_combine(seed_combine(master_seed, snr_idx), k_idx), static_cast<std::uint64_t>(trial));
}

/// Runs the full (snr x k x trial x algorithm) sweep. Channel, codebook and
/// samples are generated once per (snr, k, trial) cell and shared across
/// algorithms; the timer wraps only the estimator call. Solver failures are
/// recorded as rows with nmse = NaN rather than aborting. Trials may execute
/// on several threads; the returned rows are sorted by
/// (algorithm, snr, k, trial) and are deterministic apart from wall_time_s.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int threads = 1)
{
  cfg.validate();
  if (cfg.d < cfg.n_paths)
    std::cerr << "mmce: warning: rank bound d = " << cfg.d << " is below the path count L = " << cfg.n_paths << "\n";

  struct Cell {
    std::size_t snr_idx, k_idx;
    int trial;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si)
    for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki)
      for (int t = 0; t < cfg.n_trials; ++t) cells.push_back({si, ki, t});

  std::vector<std::vector<ResultRow>> per_cell(cells.size());

  auto run_cell = [&](std::size_t ci) {
    auto const [si, ki, trial] = cells[ci];
    double const snr_db = cfg.snr_db_grid[si];
    int const k_uses = cfg.k_grid[ki];
    double const noise_var = snr_db_to_noise_var(snr_db);

    std::uint64_t const seed = trial_seed(cfg.master_seed, si, ki, trial);
    RngStream root(seed);
    RngStream ch_rng = root.split(0);
    RngStream cb_rng = root.split(1);
    RngStream noise_rng = root.split(2);
    RngStream const init_rng = root.split(3);

    ChannelMatrix const channel = generate_channel(cfg.nr, cfg.nt, cfg.n_paths, ch_rng);
    SoundingCodebook const cb = generate_codebook(cfg.nr, cfg.nt, cfg.n_rf, k_uses, cb_rng);
    SampleVector const samples = sound_channel(channel, cb, noise_var, noise_rng);
    std::uint64_t const hash = detail::fnv1a_hash(samples.values);

    SolverConfig solver = cfg.solver;
    solver.d = cfg.d;
    solver.noise_var = noise_var;

    for (Algorithm const alg : cfg.algorithms) {
      ResultRow row;
      row.algorithm = alg;
      row.snr_db = snr_db;
      row.k_uses = k_uses;
      row.trial = trial;
      row.sample_hash = hash;
      try {
        auto const t0 = std::chrono::steady_clock::now();
        CMat h_est;
        switch (alg) {
          case Algorithm::ssd: {
            auto r = ssd_estimate(samples, cb, solver, init_rng);
            h_est = std::move(r.h_est);
            row.iters = r.trace.iterations();
            row.stop_reason = to_string(r.trace.stop_reason);
            break;
          }
          case Algorithm::ssd_t: {
            auto r = ssd_t_estimate(samples, cb, solver, init_rng);
            h_est = std::move(r.h_est);
            row.iters = r.trace.iterations();
            row.stop_reason = to_string(r.trace.stop_reason);
            break;
          }
          case Algorithm::mf: {
            auto r = mf_estimate(samples, cb, cfg.d, solver, init_rng);
            h_est = std::move(r.h_est);
            row.iters = r.trace.iterations();
            row.stop_reason = to_string(r.trace.stop_reason);
            break;
          }
          case Algorithm::scan: {
            h_est = scan_estimate(cb, samples);
            row.iters = 1;
            row.stop_reason = "done";
            break;
          }
          case Algorithm::nnm_svt: {
            double const step = cfg.nnm_step > 0.0 ? cfg.nnm_step : 0.9 / std::pow(affine_map_op_norm(cb), 2);
            auto r = nnm_svt_estimate(samples, cb, cfg.nnm_mu, step, cfg.nnm_iters);
            h_est = std::move(r.h_est);
            row.iters = cfg.nnm_iters;
            row.stop_reason = "max_iters";
            break;
          }
        }
        auto const t1 = std::chrono::steady_clock::now();
        row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
        row.nmse = nmse(channel.entries, h_est);
      } catch (const std::exception& e) {
        row.nmse = std::numeric_limits<double>::quiet_NaN();
        std::string reason = e.what();
        for (char& c : reason)
          if (c == ',' || c == '\n') c = ';';
        row.stop_reason = "failed(" + reason + ")";
        row.iters = 0;
      }
      per_cell[ci].push_back(std::move(row));
    }
  };

  if (threads <= 1) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t ci = next.fetch_add(1); ci < cells.size(); ci = next.fetch_add(1)) run_cell(ci);
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> rows;
  for (auto& cell_rows : per_cell)
    for (auto& r : cell_rows) rows.push_back(std::move(r));
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tuple(to_string(a.algorithm), a.snr_db, a.k_uses, a.trial) <
           std::tuple(to_string(b.algorithm), b.snr_db, b.k_uses, b.trial);
  });
  return rows;
}

/// Mean metrics per (algorithm, snr, k) cell. Failed rows (NaN nmse) are
/// excluded from the means and counted separately.
struct AggregateRow {
  Algorithm algorithm = Algorithm::ssd;
  double snr_db = 0.0;
  int k_uses = 0;
  double mean_nmse = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_iters = 0.0;
  int failures = 0;
  int successes = 0;
};

inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows)
{
  if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
  using Key = std::tuple<std::string, double, int>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{to_string(r.algorithm), r.snr_db, r.k_uses}].push_back(&r);

  std::vector<AggregateRow> out;
  for (auto& [key, members] : groups) {
    // fixed accumulation order regardless of input permutation
    std::sort(members.begin(), members.end(),
              [](const ResultRow* a, const ResultRow* b) { return a->trial < b->trial; });
    AggregateRow a;
    a.algorithm = members.front()->algorithm;
    a.snr_db = std::get<1>(key);
    a.k_uses = std::get<2>(key);
    double sum_nmse = 0.0, sum_wall = 0.0, sum_iters = 0.0;
    for (const ResultRow* r : members) {
      if (std::isnan(r->nmse)) {
        ++a.failures;
        continue;
      }
      ++a.successes;
      sum_nmse += r->nmse;
      sum_wall += r->wall_time_s;
      sum_iters += r->iters;
    }
    if (a.successes > 0) {
      a.mean_nmse = sum_nmse / a.successes;
      a.mean_wall_time_s = sum_wall / a.successes;
      a.mean_iters = sum_iters / a.successes;
    } else {
      a.mean_nmse = std::numeric_limits<double>::quiet_NaN();
      a.mean_wall_time_s = std::numeric_limits<double>::quiet_NaN();
      a.mean_iters = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(a));
  }
  return out;
}

/// Result CSV with the exact header
/// `algorithm,snr_db,k_uses,trial,nmse,wall_time_s,iters,stop_reason`.
inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
  out << "algorithm,snr_db,k_uses,trial,nmse,wall_time_s,iters,stop_reason\n";
  for (const auto& r : rows)
    out << to_string(r.algorithm) << ',' << fmt_double(r.snr_db) << ',' << r.k_uses << ',' << r.trial << ','
        << fmt_double(r.nmse) << ',' << fmt_double(r.wall_time_s) << ',' << r.iters << ',' << r.stop_reason
        << '\n';
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows)
{
  auto out = detail::open_out(path);
  write_results_csv(out, rows);
}

inline void write_summary_csv(std::ostream& out, const std::vector<AggregateRow>& rows)
{
  out << "algorithm,snr_db,k_uses,mean_nmse,mean_wall_time_s,mean_iters,failures,successes\n";
  for (const auto& r : rows)
    out << to_string(r.algorithm) << ',' << fmt_double(r.snr_db) << ',' << r.k_uses << ','
        << fmt_double(r.mean_nmse) << ',' << fmt_double(r.mean_wall_time_s) << ',' << fmt_double(r.mean_iters)
        << ',' << r.failures << ',' << r.successes << '\n';
}

inline void write_summary_csv(const std::string& path, const std::vector<AggregateRow>& rows)
{
  auto out = detail::open_out(path);
  write_summary_csv(out, rows);
}

/// Parses the flat `key = value` config format; lists are comma-separated.
/// Blank lines and lines starting with '#' are skipped.
inline ExperimentConfig parse_experiment_config(std::istream& in)
{
  ExperimentConfig cfg;
  auto trim = [](std::string s) {
    auto const a = s.find_first_not_of(" \t");
    auto const b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  };
  auto split_list = [&](const std::string& s) {
    std::vector<std::string> items;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) items.push_back(trim(cur));
    return items;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string const t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto const eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    std::string const key = trim(t.substr(0, eq));
    std::string const val = trim(t.substr(eq + 1));

    if (key == "nr") cfg.nr = static_cast<int>(parse_long(val));
    else if (key == "nt") cfg.nt = static_cast<int>(parse_long(val));
    else if (key == "n_paths") cfg.n_paths = static_cast<int>(parse_long(val));
    else if (key == "d") cfg.d = static_cast<int>(parse_long(val));
    else if (key == "n_rf") cfg.n_rf = static_cast<int>(parse_long(val));
    else if (key == "n_streams") cfg.n_streams = static_cast<int>(parse_long(val));
    else if (key == "n_trials") cfg.n_trials = static_cast<int>(parse_long(val));
    else if (key == "master_seed") cfg.master_seed = static_cast<std::uint64_t>(parse_long(val));
    else if (key == "max_iters") cfg.solver.max_iters = static_cast<int>(parse_long(val));
    else if (key == "stagnation_tol") cfg.solver.stagnation_tol = parse_double(val);
    else if (key == "bisect_tol") cfg.solver.bisect_tol = parse_double(val);
    else if (key == "nnm_mu") cfg.nnm_mu = parse_double(val);
    else if (key == "nnm_step") cfg.nnm_step = parse_double(val);
    else if (key == "nnm_iters") cfg.nnm_iters = static_cast<int>(parse_long(val));
    else if (key == "snr_db") {
      cfg.snr_db_grid.clear();
      for (const auto& item : split_list(val)) cfg.snr_db_grid.push_back(parse_double(item));
    } else if (key == "k_uses") {
      cfg.k_grid.clear();
      for (const auto& item : split_list(val)) cfg.k_grid.push_back(static_cast<int>(parse_long(item)));
    } else if (key == "algorithms") {
      cfg.algorithms.clear();
      for (const auto& item : split_list(val)) cfg.algorithms.push_back(algorithm_from_string(item));
    } else {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path)
{
  auto in = detail::open_in(path);
  return parse_experiment_config(in);
}

}  // namespace mmce
