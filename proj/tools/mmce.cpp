// Command-line front end: Monte-Carlo benchmarking, single-instance
// estimation from serialized inputs, per-iteration traces, and input
// generation.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "mmce/mmce.hpp"

namespace {

int run_bench(const std::string& config_path, const std::string& out_path,
              std::optional<std::uint64_t> seed_override, int threads, const std::string& summary_path)
{
  mmce::ExperimentConfig cfg = mmce::load_experiment_config(config_path);
  if (seed_override) cfg.master_seed = *seed_override;

  auto const rows = mmce::run_experiment(cfg, threads);
  mmce::write_results_csv(out_path, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";

  auto const summary = mmce::aggregate(rows);
  mmce::write_summary_csv(std::cout, summary);
  if (!summary_path.empty()) mmce::write_summary_csv(summary_path, summary);
  return 0;
}

int run_estimate(const std::string& y_path, const std::string& cb_path, const std::string& alg, int d,
                 std::uint64_t seed, std::optional<double> noise_var, int max_iters, double stagnation_tol,
                 const std::string& out_path, const std::string& trace_path)
{
  auto const samples_file = mmce::read_samples_csv(y_path);
  auto const cb = mmce::read_codebook_csv(cb_path);

  mmce::SampleVector samples = samples_file;
  if (noise_var) samples.noise_var = *noise_var;

  mmce::SolverConfig solver;
  solver.d = d;
  solver.max_iters = max_iters;
  solver.stagnation_tol = stagnation_tol;
  solver.noise_var = samples.noise_var;

  mmce::RngStream init(seed);
  mmce::EstimateResult res;
  auto const algorithm = mmce::algorithm_from_string(alg);
  switch (algorithm) {
    case mmce::Algorithm::ssd: res = mmce::ssd_estimate(samples, cb, solver, init); break;
    case mmce::Algorithm::ssd_t: res = mmce::ssd_t_estimate(samples, cb, solver, init); break;
    case mmce::Algorithm::mf: res = mmce::mf_estimate(samples, cb, d, solver, init); break;
    default: throw CLI::ValidationError("--alg", "estimate supports ssd, ssd-t and mf");
  }

  mmce::write_matrix_csv(out_path, res.h_est);
  if (!trace_path.empty()) mmce::write_trace_csv(trace_path, res.trace);
  std::cout << "algorithm=" << mmce::to_string(algorithm) << " iters=" << res.trace.iterations()
            << " objective=" << mmce::fmt_double(res.trace.objective.back())
            << " stop=" << mmce::to_string(res.trace.stop_reason) << "\n"
            << "estimate written to " << out_path << "\n";
  return 0;
}

int run_trace(const std::string& alg, int nr, int nt, int n_paths, int d, int n_rf, int k_uses, double snr_db,
              std::uint64_t seed, int max_iters, const std::string& out_path, const std::string& est_path)
{
  double const noise_var = mmce::snr_db_to_noise_var(snr_db);
  mmce::RngStream root(seed);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto noise_rng = root.split(2);
  mmce::RngStream const init = root.split(3);

  auto const channel = mmce::generate_channel(nr, nt, n_paths, ch_rng);
  auto const cb = mmce::generate_codebook(nr, nt, n_rf, k_uses, cb_rng);
  auto const samples = mmce::sound_channel(channel, cb, noise_var, noise_rng);

  mmce::SolverConfig solver;
  solver.d = d;
  solver.max_iters = max_iters;
  solver.stagnation_tol = 1e-300;  // emit every sweep
  solver.noise_var = noise_var;

  mmce::EstimateResult res;
  auto const algorithm = mmce::algorithm_from_string(alg);
  switch (algorithm) {
    case mmce::Algorithm::ssd: res = mmce::ssd_estimate(samples, cb, solver, init, &channel.entries); break;
    case mmce::Algorithm::ssd_t:
      res = mmce::ssd_t_estimate(samples, cb, solver, init, &channel.entries);
      break;
    case mmce::Algorithm::mf: res = mmce::mf_estimate(samples, cb, d, solver, init, &channel.entries); break;
    default: throw CLI::ValidationError("--alg", "trace supports ssd, ssd-t and mf");
  }

  mmce::write_trace_csv(out_path, res.trace);
  if (!est_path.empty()) mmce::write_matrix_csv(est_path, res.h_est);
  std::cout << "trace with " << res.trace.iterations() << " sweeps written to " << out_path << "\n";
  return 0;
}

int run_gen(int nr, int nt, int n_paths, int n_rf, int k_uses, double snr_db, std::uint64_t seed,
            const std::string& channel_path, const std::string& paths_path, const std::string& cb_path,
            const std::string& samples_path)
{
  double const noise_var = mmce::snr_db_to_noise_var(snr_db);
  mmce::RngStream root(seed);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto noise_rng = root.split(2);

  auto const channel = mmce::generate_channel(nr, nt, n_paths, ch_rng);
  auto const cb = mmce::generate_codebook(nr, nt, n_rf, k_uses, cb_rng);
  auto const samples = mmce::sound_channel(channel, cb, noise_var, noise_rng);

  if (!channel_path.empty()) mmce::write_matrix_csv(channel_path, channel.entries);
  if (!paths_path.empty()) mmce::write_paths_csv(paths_path, channel.paths);
  if (!cb_path.empty()) mmce::write_codebook_csv(cb_path, cb);
  if (!samples_path.empty()) mmce::write_samples_csv(samples_path, samples);
  std::cout << "generated " << nr << "x" << nt << " channel with " << n_paths << " paths, " << k_uses
            << " channel uses at snr " << snr_db << " dB\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  mmce::limit_blas_threads();

  CLI::App app{"compressive subspace sampling and low-rank channel estimation toolkit"};
  app.require_subcommand(1);

  // bench
  std::string bench_config, bench_out, bench_summary;
  std::uint64_t bench_seed = 0;
  int bench_threads = 1;
  auto* bench = app.add_subcommand("bench", "run a Monte-Carlo experiment from a config file");
  bench->add_option("--config", bench_config, "experiment config file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "per-trial result CSV")->required();
  auto* seed_opt = bench->add_option("--seed", bench_seed, "override the master seed");
  bench->add_option("--threads", bench_threads, "worker threads for trials")->default_val(1);
  bench->add_option("--summary", bench_summary, "also write the aggregated summary CSV here");

  // estimate
  std::string est_y, est_cb, est_alg = "ssd", est_out = "estimate.csv", est_trace;
  int est_d = 0, est_max_iters = 30;
  double est_stag_tol = 1e-8;
  double est_noise_var = -1.0;
  std::uint64_t est_seed = 1;
  auto* est = app.add_subcommand("estimate", "estimate a channel from serialized samples and codebook");
  est->add_option("--y", est_y, "sample CSV (idx,re,im with noise_var sidecar)")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--codebook", est_cb, "codebook CSV (k,kind,row,col,re,im)")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--alg", est_alg, "ssd|ssd-t|mf")->required();
  est->add_option("--d", est_d, "rank bound")->required();
  est->add_option("--seed", est_seed, "initialization seed")->default_val(1);
  auto* nv_opt = est->add_option("--noise-var", est_noise_var, "override the sidecar noise variance");
  est->add_option("--max-iters", est_max_iters)->default_val(30);
  est->add_option("--stagnation-tol", est_stag_tol)->default_val(1e-8);
  est->add_option("--out", est_out, "estimate matrix CSV")->default_val("estimate.csv");
  est->add_option("--trace-out", est_trace, "optional per-iteration trace CSV");

  // trace
  std::string tr_alg = "ssd", tr_out = "trace.csv", tr_est;
  int tr_nr = 16, tr_nt = 64, tr_paths = 2, tr_d = 3, tr_nrf = 4, tr_k = 100, tr_max_iters = 30;
  double tr_snr = 0.0;
  std::uint64_t tr_seed = 1;
  auto* tr = app.add_subcommand("trace", "run one synthetic instance and emit the per-iteration trace");
  tr->add_option("--alg", tr_alg, "ssd|ssd-t|mf")->default_val("ssd");
  tr->add_option("--nr", tr_nr)->default_val(16);
  tr->add_option("--nt", tr_nt)->default_val(64);
  tr->add_option("--paths", tr_paths)->default_val(2);
  tr->add_option("--d", tr_d)->default_val(3);
  tr->add_option("--n-rf", tr_nrf)->default_val(4);
  tr->add_option("--k", tr_k)->default_val(100);
  tr->add_option("--snr-db", tr_snr)->default_val(0.0);
  tr->add_option("--seed", tr_seed)->default_val(1);
  tr->add_option("--max-iters", tr_max_iters)->default_val(30);
  tr->add_option("--out", tr_out)->default_val("trace.csv");
  tr->add_option("--est-out", tr_est, "optional estimate matrix CSV");

  // gen
  int g_nr = 16, g_nt = 64, g_paths = 2, g_nrf = 4, g_k = 100;
  double g_snr = 10.0;
  std::uint64_t g_seed = 1;
  std::string g_channel, g_paths_out, g_cb, g_samples;
  auto* gen = app.add_subcommand("gen", "generate a channel, codebook and samples as CSV");
  gen->add_option("--nr", g_nr)->default_val(16);
  gen->add_option("--nt", g_nt)->default_val(64);
  gen->add_option("--paths", g_paths)->default_val(2);
  gen->add_option("--n-rf", g_nrf)->default_val(4);
  gen->add_option("--k", g_k)->default_val(100);
  gen->add_option("--snr-db", g_snr)->default_val(10.0);
  gen->add_option("--seed", g_seed)->default_val(1);
  gen->add_option("--channel-out", g_channel, "channel matrix CSV");
  gen->add_option("--paths-out", g_paths_out, "path parameter CSV");
  gen->add_option("--codebook-out", g_cb, "codebook CSV");
  gen->add_option("--samples-out", g_samples, "sample CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed())
      return run_bench(bench_config, bench_out,
                       seed_opt->count() ? std::optional<std::uint64_t>(bench_seed) : std::nullopt,
                       bench_threads, bench_summary);
    if (est->parsed())
      return run_estimate(est_y, est_cb, est_alg, est_d, est_seed,
                          nv_opt->count() ? std::optional<double>(est_noise_var) : std::nullopt,
                          est_max_iters, est_stag_tol, est_out, est_trace);
    if (tr->parsed())
      return run_trace(tr_alg, tr_nr, tr_nt, tr_paths, tr_d, tr_nrf, tr_k, tr_snr, tr_seed, tr_max_iters,
                       tr_out, tr_est);
    if (gen->parsed())
      return run_gen(g_nr, g_nt, g_paths, g_nrf, g_k, g_snr, g_seed, g_channel, g_paths_out, g_cb, g_samples);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
