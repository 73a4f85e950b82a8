#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>
#include <vector>

#include "mmce/lstsq.hpp"
#include "mmce/rng.hpp"
#include "mmce/sounding.hpp"
#include "mmce/ssd.hpp"

namespace mmce {

/// Max-power selection over the per-use samples. k_opt is 1-based; ties break
/// toward the lowest index.
struct ScanOutcome {
  int k_opt = 0;
  std::vector<double> powers;
};

inline ScanOutcome subspace_scan(const std::vector<CVec>& per_use_samples)
{
  if (per_use_samples.empty()) throw std::invalid_argument("subspace_scan: no samples");
  ScanOutcome out;
  out.powers.reserve(per_use_samples.size());
  for (const auto& y : per_use_samples) out.powers.push_back(y.squaredNorm());
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.powers.size(); ++k)
    if (out.powers[k] > out.powers[best]) best = k;
  out.k_opt = static_cast<int>(best) + 1;
  return out;
}

/// Minimum-norm channel completion from the scanned best pair: the smallest
/// (Frobenius) matrix consistent with the selected sample block,
/// H = W pinv(W^H W) y_k f^H / ||f||^2. Used by the benchmark to attach an
/// error figure to the scanning baseline, which by itself only picks a pair.
inline CMat scan_estimate(const SoundingCodebook& cb, const SampleVector& y)
{
  auto const blocks = per_use_blocks(y.values, cb.n_rf);
  ScanOutcome const scan = subspace_scan(blocks);
  int const k = scan.k_opt - 1;
  const CMat& w = cb.combiners[k];
  const CVec& f = cb.precoders[k];
  // min-norm solution of W^H x = y_k, then the rank-one completion x f^H/||f||^2
  Eigen::CompleteOrthogonalDecomposition<CMat> cod(w.adjoint());
  CVec const x = cod.solve(blocks[k]);
  return x * (f.adjoint() / f.squaredNorm());
}

/// Unconstrained two-factor alternating least squares: minimize
/// ||y - A(U V)||_2^2 over U (nr x d) and V (d x nt). A rank-deficient design
/// falls back to a ridge solve with 1e-10 on the diagonal.
inline EstimateResult mf_estimate(const SampleVector& y, const SoundingCodebook& cb, int d,
                                  const SolverConfig& cfg, RngStream init_rng, const CMat* h_true = nullptr)
{
  if (d < 1) throw std::invalid_argument("mf_estimate: d must be >= 1");
  if (y.values.size() != static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf)
    throw std::invalid_argument("mf_estimate: sample length does not match the codebook");

  auto solve_ls = [](const CMat& b, const CVec& rhs) {
    detail::SvdSystem sys(b, rhs);
    return sys.full_rank() ? sys.solve(0.0) : sys.solve(1e-10);
  };

  // Gaussian start, unscaled; draw order matches the constrained estimator.
  CMat u(cb.nr, d);
  CMat v(d, cb.nt);  // plain second factor, no conjugation
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < cb.nr; ++i) u(i, j) = init_rng.cnormal();
  for (int t = 0; t < cb.nt; ++t)
    for (int i = 0; i < d; ++i) v(i, t) = init_rng.cnormal();

  CVec const ones = CVec::Ones(d);
  EstimateResult res;

  double prev_obj = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    CMat const b_col = build_col_design(cb, ones, v.adjoint());
    CVec const u_vec = solve_ls(b_col, y.values);
    u = Eigen::Map<const CMat>(u_vec.data(), cb.nr, d);

    CMat const b_row = build_row_design(cb, u, ones);
    CVec const v_vec = solve_ls(b_row, y.values);
    v = Eigen::Map<const CMat>(v_vec.data(), d, cb.nt);

    double const obj = (y.values - affine_map(cb, u * v)).squaredNorm();
    res.trace.objective.push_back(obj);
    if (h_true) res.trace.nmse.push_back((*h_true - u * v).squaredNorm() / h_true->squaredNorm());

    if (iter > 0 && std::abs(obj - prev_obj) / std::max(prev_obj, 1e-30) < cfg.stagnation_tol) {
      res.trace.stop_reason = StopReason::stagnated;
      break;
    }
    prev_obj = obj;
    res.trace.stop_reason = StopReason::max_iters;
  }

  res.h_est = u * v;
  res.decomposition.col_basis = std::move(u);
  res.decomposition.row_basis = v.adjoint();
  res.decomposition.power = ones;
  return res;
}

/// Power-iteration estimate of the operator norm of the sampling map.
inline double affine_map_op_norm(const SoundingCodebook& cb, int iters = 50, std::uint64_t seed = 7)
{
  RngStream rng(seed);
  CMat x(cb.nr, cb.nt);
  for (int j = 0; j < cb.nt; ++j)
    for (int i = 0; i < cb.nr; ++i) x(i, j) = rng.cnormal();
  double norm_sq = 0.0;
  for (int it = 0; it < iters; ++it) {
    x /= x.norm();
    CMat const next = affine_map_adjoint(cb, affine_map(cb, x));
    norm_sq = next.norm();  // Rayleigh estimate of ||A||^2
    x = next;
  }
  return std::sqrt(norm_sq);
}

struct SvtResult {
  CMat h_est;
  std::vector<double> objective;  // 0.5*||y - A(H)||^2 + mu*||H||_*
  double step_used = 0.0;
};

/// Proximal-gradient surrogate for nuclear-norm-regularized recovery: a
/// gradient step on 0.5*||y - A(H)||_2^2 followed by singular-value soft
/// thresholding at step*mu. An approximate stand-in, not an exact constrained
/// nuclear-norm solver. If the objective grows three iterations in a row the
/// step is halved.
inline SvtResult nnm_svt_estimate(const SampleVector& y, const SoundingCodebook& cb, double mu, double step,
                                  int iters)
{
  if (mu < 0.0) throw std::invalid_argument("nnm_svt_estimate: mu must be nonnegative");
  if (step <= 0.0) throw std::invalid_argument("nnm_svt_estimate: step must be positive");
  if (iters < 1) throw std::invalid_argument("nnm_svt_estimate: iters must be >= 1");

  SvtResult res;
  res.step_used = step;
  CMat h = CMat::Zero(cb.nr, cb.nt);

  auto objective = [&](const CMat& m) {
    Eigen::BDCSVD<CMat> svd(m);
    return 0.5 * (y.values - affine_map(cb, m)).squaredNorm() + mu * svd.singularValues().sum();
  };

  int grow_streak = 0;
  double prev = objective(h);
  res.objective.push_back(prev);
  for (int it = 0; it < iters; ++it) {
    CVec const resid = y.values - affine_map(cb, h);
    CMat const g = h + res.step_used * affine_map_adjoint(cb, resid);
    Eigen::BDCSVD<CMat> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = std::max(0.0, sv(i) - res.step_used * mu);
    h = svd.matrixU() * sv.asDiagonal() * svd.matrixV().adjoint();

    double const obj = objective(h);
    res.objective.push_back(obj);
    if (obj > prev) {
      if (++grow_streak >= 3) {
        res.step_used *= 0.5;
        grow_streak = 0;
      }
    } else {
      grow_streak = 0;
    }
    prev = obj;
  }
  res.h_est = std::move(h);
  return res;
}

}  // namespace mmce
