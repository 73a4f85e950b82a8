#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmce/rng.hpp"

namespace mmce {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// One propagation path: complex gain plus departure/arrival angles (radians).
struct PathParams {
  Cplx gain;
  double aod;
  double aoa;
};

/// Folds an arbitrary angle into [-pi/2, pi/2] preserving its sine, which is
/// the only quantity a half-wavelength linear array can resolve.
inline double normalized_angle(double angle) { return std::asin(std::sin(angle)); }

/// Half-wavelength uniform linear array response, unit Euclidean norm:
/// element m is exp(i*pi*m*sin(angle)) / sqrt(n).
inline CVec ula_response(int n_antennas, double angle)
{
  if (n_antennas < 1) throw std::invalid_argument("ula_response: n_antennas must be >= 1");
  CVec a(n_antennas);
  double const s = std::sin(angle);
  double const scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
  for (int m = 0; m < n_antennas; ++m) {
    double const phase = std::numbers::pi * m * s;
    a(m) = scale * Cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

/// Sparse geometric channel: a sum of L rank-one path contributions,
/// H = sqrt(nr*nt/L) * sum_l gain_l * a_r(aoa_l) * a_t(aod_l)^H.
struct ChannelMatrix {
  CMat entries;  // nr x nt
  std::vector<PathParams> paths;
  int nr = 0;
  int nt = 0;
};

/// Rebuilds the channel matrix from explicit path parameters.
inline CMat channel_from_paths(int nr, int nt, const std::vector<PathParams>& paths)
{
  if (nr < 1 || nt < 1) throw std::invalid_argument("channel_from_paths: dimensions must be positive");
  if (paths.empty()) throw std::invalid_argument("channel_from_paths: need at least one path");
  CMat h = CMat::Zero(nr, nt);
  for (const auto& p : paths) h += p.gain * (ula_response(nr, p.aoa) * ula_response(nt, p.aod).adjoint());
  h *= std::sqrt(static_cast<double>(nr) * static_cast<double>(nt) / static_cast<double>(paths.size()));
  return h;
}

/// Draws a channel with n_paths i.i.d. CN(0,1) gains and angles uniform on
/// [-pi/2, pi/2). Draw order per path: gain, aod, aoa.
inline ChannelMatrix generate_channel(int nr, int nt, int n_paths, RngStream& rng)
{
  if (nr < 1 || nt < 1) throw std::invalid_argument("generate_channel: dimensions must be positive");
  if (n_paths < 1 || n_paths > std::min(nr, nt))
    throw std::invalid_argument("generate_channel: n_paths must satisfy 1 <= n_paths <= min(nr, nt)");

  ChannelMatrix ch;
  ch.nr = nr;
  ch.nt = nt;
  ch.paths.reserve(n_paths);
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (int l = 0; l < n_paths; ++l) {
    PathParams p;
    p.gain = rng.cnormal();
    p.aod = rng.uniform(-half_pi, half_pi);
    p.aoa = rng.uniform(-half_pi, half_pi);
    ch.paths.push_back(p);
  }
  ch.entries = channel_from_paths(nr, nt, ch.paths);
  return ch;
}

}  // namespace mmce
