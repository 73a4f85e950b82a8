#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <concepts>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mmce/lstsq.hpp"
#include "mmce/rng.hpp"
#include "mmce/sounding.hpp"

namespace mmce {

/// Rank-d channel decomposition H ~ U * diag(power) * V^H under the trace-ball
/// constraints tr(U^H U) <= d and tr(V^H V) <= d.
struct RankDDecomposition {
  CMat col_basis;  // nr x d
  CMat row_basis;  // nt x d
  CVec power;      // d complex diagonal entries

  CMat matrix() const { return col_basis * power.asDiagonal() * row_basis.adjoint(); }
};

enum class StopReason { max_iters, stagnated, threshold };

inline const char* to_string(StopReason r)
{
  switch (r) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::stagnated: return "stagnated";
    case StopReason::threshold: return "threshold";
  }
  return "unknown";
}

struct SolverConfig {
  int d = 1;
  int max_iters = 30;
  double stagnation_tol = 1e-8;  // relative objective change
  double bisect_tol = 0.0;       // |g(lambda) - d| tolerance; 0 selects 1e-9 * d
  double noise_var = 0.0;        // only consulted by the thresholded variant

  double effective_bisect_tol() const { return bisect_tol > 0.0 ? bisect_tol : 1e-9 * d; }

  void validate() const
  {
    if (d < 1) throw std::invalid_argument("SolverConfig: d must be >= 1");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (stagnation_tol <= 0.0) throw std::invalid_argument("SolverConfig: stagnation_tol must be > 0");
    if (bisect_tol < 0.0) throw std::invalid_argument("SolverConfig: bisect_tol must be nonnegative");
    if (noise_var < 0.0) throw std::invalid_argument("SolverConfig: noise_var must be nonnegative");
  }
};

/// Per-sweep solver diagnostics. objective[l] = ||y - A(U L V^H)||_2^2 after
/// full sweep l; nmse is filled only when the true channel is supplied.
struct SolveTrace {
  std::vector<double> objective;
  std::vector<double> nmse;
  std::vector<double> col_norm_sq;  // tr(U^H U) per sweep
  std::vector<double> row_norm_sq;  // tr(V^H V) per sweep
  StopReason stop_reason = StopReason::max_iters;
  bool warned_underdetermined = false;

  int iterations() const { return static_cast<int>(objective.size()); }
};

/// Design matrix of the column-subspace subproblem: the stack over k of
/// ((L V^H f_k)^T kron W_k^H), so that affine_map(cb, U L V^H) = B * vec(U).
inline CMat build_col_design(const SoundingCodebook& cb, const CVec& power, const CMat& row_basis)
{
  int const d = static_cast<int>(power.size());
  if (row_basis.rows() != cb.nt || row_basis.cols() != d)
    throw std::invalid_argument("build_col_design: row basis dimensions do not match");
  CMat b(static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf, static_cast<Eigen::Index>(d) * cb.nr);
  for (int k = 0; k < cb.k_uses; ++k) {
    CVec const a = power.asDiagonal() * (row_basis.adjoint() * cb.precoders[k]);  // d
    CMat const wh = cb.combiners[k].adjoint();                                    // n_rf x nr
    for (int j = 0; j < d; ++j)
      b.block(static_cast<Eigen::Index>(k) * cb.n_rf, static_cast<Eigen::Index>(j) * cb.nr, cb.n_rf, cb.nr) =
          a(j) * wh;
  }
  return b;
}

/// Design matrix of the row-subspace subproblem: with M_k = W_k^H U L, the
/// stack over k of (f_k^T kron M_k), so that
/// affine_map(cb, U L V^H) = B * vec(V^H).
inline CMat build_row_design(const SoundingCodebook& cb, const CMat& col_basis, const CVec& power)
{
  int const d = static_cast<int>(power.size());
  if (col_basis.rows() != cb.nr || col_basis.cols() != d)
    throw std::invalid_argument("build_row_design: column basis dimensions do not match");
  CMat b(static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf, static_cast<Eigen::Index>(d) * cb.nt);
  for (int k = 0; k < cb.k_uses; ++k) {
    CMat const m = cb.combiners[k].adjoint() * col_basis * power.asDiagonal();  // n_rf x d
    for (int t = 0; t < cb.nt; ++t)
      b.block(static_cast<Eigen::Index>(k) * cb.n_rf, static_cast<Eigen::Index>(t) * d, cb.n_rf, d) =
          cb.precoders[k](t) * m;
  }
  return b;
}

/// Finds lambda > 0 with |g(lambda) - target| <= tol for a continuous,
/// strictly decreasing g with g(0+) > target. The bracket starts at 1 and is
/// doubled until g crosses the target, then bisected.
template <std::invocable<double> G>
double bisect_lambda(G&& g, double target, double tol)
{
  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (g(hi) >= target) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) throw std::runtime_error("bisect_lambda: failed to bracket the multiplier");
  }
  for (int it = 0; it < 5000; ++it) {
    double const mid = 0.5 * (lo + hi);
    double const val = g(mid);
    if (std::abs(val - target) <= tol) return mid;
    (val > target ? lo : hi) = mid;
  }
  throw std::runtime_error("bisect_lambda: tolerance not reached");
}

/// Least squares under a squared-norm budget: minimize ||y - B x||_2^2 subject
/// to ||x||_2^2 <= radius_sq. Returns the solution and the multiplier lambda
/// (zero when the unconstrained minimizer is feasible). Solved through a thin
/// SVD; a rank-deficient B yields the minimum-norm branch instead of failing.
inline std::pair<CVec, double> solve_trace_ball_ls(const CMat& b, const CVec& y, double radius_sq,
                                                   double bisect_tol = 1e-9)
{
  if (b.rows() != y.size()) throw std::invalid_argument("solve_trace_ball_ls: incompatible shapes");
  if (radius_sq <= 0.0) throw std::invalid_argument("solve_trace_ball_ls: radius must be positive");
  detail::SvdSystem sys(b, y);
  if (sys.solution_norm_sq(0.0) <= radius_sq + bisect_tol) return {sys.solve(0.0), 0.0};
  double const lambda = bisect_lambda([&](double l) { return sys.solution_norm_sq(l); }, radius_sq, bisect_tol);
  return {sys.solve(lambda), lambda};
}

namespace detail {

/// P matrix of the power-allocation subproblem: column j samples the rank-one
/// outer product of the j-th basis pair, [P]_j = affine_map(cb, U_j V_j^H).
inline CMat build_power_design(const SoundingCodebook& cb, const CMat& col_basis, const CMat& row_basis)
{
  int const d = static_cast<int>(col_basis.cols());
  CMat p(static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf, d);
  for (int k = 0; k < cb.k_uses; ++k) {
    CMat const wu = cb.combiners[k].adjoint() * col_basis;       // n_rf x d
    CVec const vf = row_basis.adjoint() * cb.precoders[k];       // d
    for (int j = 0; j < d; ++j)
      p.col(j).segment(static_cast<Eigen::Index>(k) * cb.n_rf, cb.n_rf) = wu.col(j) * vf(j);
  }
  return p;
}

}  // namespace detail

/// Optimal power allocation for fixed bases: the least-squares fit of y by the
/// columns of P. Requires P to have full column rank.
inline CVec solve_power_alloc(const SoundingCodebook& cb, const CMat& col_basis, const CMat& row_basis,
                              const CVec& y)
{
  if (col_basis.cols() != row_basis.cols())
    throw std::invalid_argument("solve_power_alloc: basis column counts differ");
  CMat const p = detail::build_power_design(cb, col_basis, row_basis);
  if (p.rows() != y.size()) throw std::invalid_argument("solve_power_alloc: sample length does not match");
  detail::SvdSystem sys(p, y);
  if (!sys.full_rank()) {
    // identify the first dependent column for the error message
    Eigen::ColPivHouseholderQR<CMat> qr(p);
    Eigen::Index const r = qr.rank();
    Eigen::Index offending = 0;
    if (r < p.cols()) offending = qr.colsPermutation().indices()(r);
    std::ostringstream msg;
    msg << "solve_power_alloc: sampled subspace pairs are linearly dependent (rank " << r << " < "
        << p.cols() << "; first dependent pair index " << offending << ")";
    throw std::runtime_error(msg.str());
  }
  return sys.solve(0.0);
}

/// Result of an alternating estimator run.
struct EstimateResult {
  CMat h_est;
  RankDDecomposition decomposition;
  SolveTrace trace;
};

namespace detail {

inline void sort_by_power(RankDDecomposition& dec)
{
  int const d = static_cast<int>(dec.power.size());
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(dec.power(a)) > std::abs(dec.power(b)); });
  CMat u(dec.col_basis.rows(), d);
  CMat v(dec.row_basis.rows(), d);
  CVec p(d);
  for (int j = 0; j < d; ++j) {
    u.col(j) = dec.col_basis.col(idx[j]);
    v.col(j) = dec.row_basis.col(idx[j]);
    p(j) = dec.power(idx[j]);
  }
  dec.col_basis = std::move(u);
  dec.row_basis = std::move(v);
  dec.power = std::move(p);
}

/// Feasible random start: Gaussian bases rescaled onto the trace sphere,
/// identity power. Draw order: U (column-major), then V (column-major).
inline RankDDecomposition random_init(int nr, int nt, int d, RngStream& rng)
{
  RankDDecomposition dec;
  dec.col_basis = CMat(nr, d);
  dec.row_basis = CMat(nt, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < nr; ++i) dec.col_basis(i, j) = rng.cnormal();
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < nt; ++i) dec.row_basis(i, j) = rng.cnormal();
  dec.col_basis *= std::sqrt(static_cast<double>(d)) / dec.col_basis.norm();
  dec.row_basis *= std::sqrt(static_cast<double>(d)) / dec.row_basis.norm();
  dec.power = CVec::Ones(d);
  return dec;
}

/// stderr note for a sub-identifiable sampling budget, emitted once per
/// distinct geometry so Monte-Carlo sweeps do not flood the log
inline void warn_underdetermined_once(int d, int nr, int nt, int n_rf, int k_uses, double bound)
{
  static std::mutex mu;
  static std::set<std::tuple<int, int, int, int, int>> seen;
  std::lock_guard<std::mutex> const lock(mu);
  if (seen.insert({d, nr, nt, n_rf, k_uses}).second)
    std::cerr << "mmce: warning: K = " << k_uses << " channel uses is at or below the identifiability bound "
              << bound << " for d = " << d << "\n";
}

inline EstimateResult alternating_ssd(const SampleVector& y, const SoundingCodebook& cb, const SolverConfig& cfg,
                                      RngStream init_rng, const CMat* h_true, bool use_threshold)
{
  cfg.validate();
  if (y.values.size() != static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf)
    throw std::invalid_argument("ssd_estimate: sample length does not match the codebook");

  double const btol = cfg.effective_bisect_tol();
  double const samples = static_cast<double>(cb.k_uses) * cb.n_rf;
  double const k_bound = min_channel_uses(cfg.d, cb.nr, cb.nt, cb.n_rf);

  EstimateResult res;
  res.trace.warned_underdetermined = static_cast<double>(cb.k_uses) <= k_bound;
  if (res.trace.warned_underdetermined)
    warn_underdetermined_once(cfg.d, cb.nr, cb.nt, cb.n_rf, cb.k_uses, k_bound);

  RankDDecomposition dec = random_init(cb.nr, cb.nt, cfg.d, init_rng);

  double prev_obj = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // (S1) column subspace with V, power fixed
    CMat const b_col = build_col_design(cb, dec.power, dec.row_basis);
    CVec const u_vec = solve_trace_ball_ls(b_col, y.values, cfg.d, btol).first;
    dec.col_basis = Eigen::Map<const CMat>(u_vec.data(), cb.nr, cfg.d);

    // (S2) row subspace with U, power fixed; unknown is vec(V^H)
    CMat const b_row = build_row_design(cb, dec.col_basis, dec.power);
    CVec const vh_vec = solve_trace_ball_ls(b_row, y.values, cfg.d, btol).first;
    dec.row_basis = Eigen::Map<const CMat>(vh_vec.data(), cfg.d, cb.nt).adjoint();

    // (S3) power allocation with both bases fixed (minimum-norm fit; a
    // rank-deficient P cannot derail the sweep)
    CMat const p = detail::build_power_design(cb, dec.col_basis, dec.row_basis);
    detail::SvdSystem psys(p, y.values);
    dec.power = psys.solve(0.0);

    double const obj = (y.values - p * dec.power).squaredNorm();
    res.trace.objective.push_back(obj);
    res.trace.col_norm_sq.push_back(dec.col_basis.squaredNorm());
    res.trace.row_norm_sq.push_back(dec.row_basis.squaredNorm());
    if (h_true) {
      CMat const h = dec.matrix();
      res.trace.nmse.push_back((*h_true - h).squaredNorm() / h_true->squaredNorm());
    }

    if (use_threshold && obj / samples < cfg.noise_var) {
      res.trace.stop_reason = StopReason::threshold;
      break;
    }
    if (iter > 0 && std::abs(obj - prev_obj) / std::max(prev_obj, 1e-30) < cfg.stagnation_tol) {
      res.trace.stop_reason = StopReason::stagnated;
      break;
    }
    prev_obj = obj;
    res.trace.stop_reason = StopReason::max_iters;
  }

  detail::sort_by_power(dec);
  res.decomposition = std::move(dec);
  res.h_est = res.decomposition.matrix();
  return res;
}

}  // namespace detail

/// Alternating low-rank estimator: cycles globally-optimal updates of the
/// column subspace, row subspace and power allocation until the objective
/// stagnates or max_iters is reached.
inline EstimateResult ssd_estimate(const SampleVector& y, const SoundingCodebook& cb, const SolverConfig& cfg,
                                   RngStream init_rng, const CMat* h_true = nullptr)
{
  return detail::alternating_ssd(y, cb, cfg, init_rng, h_true, false);
}

/// Thresholded variant: additionally stops the first time the mean squared
/// residual per sample drops below the known noise variance, which counters
/// fitting the realized noise at low SNR.
inline EstimateResult ssd_t_estimate(const SampleVector& y, const SoundingCodebook& cb, const SolverConfig& cfg,
                                     RngStream init_rng, const CMat* h_true = nullptr)
{
  return detail::alternating_ssd(y, cb, cfg, init_rng, h_true, true);
}

/// Extracts an orthonormal precoder/combiner pair spanning the n_streams
/// strongest estimated subspace directions.
inline std::pair<CMat, CMat> extract_precoder(const RankDDecomposition& dec, int n_streams)
{
  int const d = static_cast<int>(dec.power.size());
  if (n_streams < 1 || n_streams > d)
    throw std::invalid_argument("extract_precoder: n_streams must satisfy 1 <= n_streams <= d");
  RankDDecomposition sorted = dec;
  detail::sort_by_power(sorted);

  auto orthonormalize = [](const CMat& cols) {
    Eigen::HouseholderQR<CMat> qr(cols);
    return CMat(qr.householderQ() * CMat::Identity(cols.rows(), cols.cols()));
  };
  CMat const w = orthonormalize(sorted.col_basis.leftCols(n_streams));
  CMat const f = orthonormalize(sorted.row_basis.leftCols(n_streams));
  return {w, f};
}

}  // namespace mmce
