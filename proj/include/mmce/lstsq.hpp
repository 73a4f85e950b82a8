#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <limits>

#include "mmce/channel.hpp"

#if defined(MMCE_USE_LAPACKE)
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>
#endif

namespace mmce::detail {

/// Thin SVD with U replaced by its action on a fixed vector: computes
/// sv (descending), V, and c = U^H y for the system matrix.
inline void thin_svd(const CMat& a, const CVec& y, Eigen::VectorXd& sv, CMat& v, CVec& c)
{
#if defined(MMCE_USE_LAPACKE)
  {
    lapack_int const m = static_cast<lapack_int>(a.rows());
    lapack_int const n = static_cast<lapack_int>(a.cols());
    lapack_int const k = std::min(m, n);
    CMat work = a;
    CMat u(m, k), vt(k, n);
    sv.resize(k);
    lapack_int const info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m, sv.data(), u.data(),
                                           m, vt.data(), k);
    if (info == 0) {
      v = vt.adjoint();
      c = u.adjoint() * y;
      return;
    }
    // divide-and-conquer failed to converge; fall through to Eigen
  }
#endif
  Eigen::BDCSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  sv = svd.singularValues();
  v = svd.matrixV();
  c = svd.matrixU().adjoint() * y;
}

/// Thin SVD of a design matrix, kept so that least-squares, ridge and the
/// constraint function g(lambda) can all be evaluated from one factorization.
struct SvdSystem {
  Eigen::VectorXd sv;       // singular values, descending
  CMat v;                   // right singular vectors (thin)
  CVec c;                   // U^H y
  Eigen::Index rank = 0;    // numerical rank

  SvdSystem(const CMat& b, const CVec& y)
  {
    if (b.rows() > b.cols()) {
      // tall case: QR first, then SVD of the small triangular factor; the
      // ridge family and singular values are unchanged
      Eigen::HouseholderQR<CMat> qr(b);
      CMat const r = qr.matrixQR().topRows(b.cols()).triangularView<Eigen::Upper>();
      CVec const qty = (qr.householderQ().adjoint() * y).head(b.cols());
      thin_svd(r, qty, sv, v, c);
    } else {
      thin_svd(b, y, sv, v, c);
    }
    double const thresh =
        sv.size() > 0 ? sv(0) * std::max(b.rows(), b.cols()) * std::numeric_limits<double>::epsilon() : 0.0;
    rank = 0;
    while (rank < sv.size() && sv(rank) > thresh) ++rank;
  }

  /// Minimum-norm least-squares solution (ridge solution when lambda > 0).
  CVec solve(double lambda) const
  {
    CVec w = CVec::Zero(v.cols());
    for (Eigen::Index i = 0; i < rank; ++i) w(i) = c(i) * sv(i) / (sv(i) * sv(i) + lambda);
    return v * w;
  }

  /// g(lambda) = squared norm of the ridge solution; strictly decreasing for
  /// lambda > 0.
  double solution_norm_sq(double lambda) const
  {
    double g = 0.0;
    for (Eigen::Index i = 0; i < rank; ++i) {
      double const d = sv(i) / (sv(i) * sv(i) + lambda);
      g += std::norm(c(i)) * d * d;
    }
    return g;
  }

  bool full_rank() const { return rank == v.cols(); }
};

}  // namespace mmce::detail
