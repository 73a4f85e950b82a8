#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmce/channel.hpp"
#include "mmce/rng.hpp"

namespace mmce {

/// Per-channel-use sounding pairs (W_k, f_k).
///
/// W_k is the Nr x N_RF receive combiner: a random-phase analog stage with
/// entry modulus 1/sqrt(Nr) and an identity digital stage. f_k is the Nt x 1
/// transmit probe: a random-phase analog stage with entry modulus 1/sqrt(Nt)
/// applied to a digitally scaled all-ones pilot, normalized so that
/// ||f_k||_2 = 1 exactly (making SNR = 1/noise_var by construction).
struct SoundingCodebook {
  std::vector<CMat> combiners;  // K matrices, each nr x n_rf
  std::vector<CVec> precoders;  // K vectors, each nt x 1
  int k_uses = 0;
  int n_rf = 0;
  int nr = 0;
  int nt = 0;
};

/// Stacked observation y = [y_1^T, ..., y_K^T]^T, k-major: the samples of
/// channel use k occupy positions k*n_rf .. (k+1)*n_rf - 1.
struct SampleVector {
  CVec values;
  double noise_var = 0.0;
};

/// Minimum channel uses for identifiability of a rank-<=d matrix:
/// d*(nr + nt - d) / n_rf.
inline double min_channel_uses(int d, int nr, int nt, int n_rf)
{
  if (n_rf < 1) throw std::invalid_argument("min_channel_uses: n_rf must be >= 1");
  if (d < 1 || d > std::min(nr, nt))
    throw std::invalid_argument("min_channel_uses: d must satisfy 1 <= d <= min(nr, nt)");
  return static_cast<double>(d) * static_cast<double>(nr + nt - d) / static_cast<double>(n_rf);
}

/// Draws a codebook of k_uses sounding pairs. Per channel use the draw order
/// is: combiner phases (column-major), then precoder analog phases
/// (column-major).
inline SoundingCodebook generate_codebook(int nr, int nt, int n_rf, int k_uses, RngStream& rng)
{
  if (nr < 1 || nt < 1 || n_rf < 1) throw std::invalid_argument("generate_codebook: dimensions must be positive");
  if (k_uses < 1) throw std::invalid_argument("generate_codebook: k_uses must be >= 1");

  SoundingCodebook cb;
  cb.k_uses = k_uses;
  cb.n_rf = n_rf;
  cb.nr = nr;
  cb.nt = nt;
  cb.combiners.reserve(k_uses);
  cb.precoders.reserve(k_uses);

  double const w_mod = 1.0 / std::sqrt(static_cast<double>(nr));
  double const f_mod = 1.0 / std::sqrt(static_cast<double>(nt));
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (int k = 0; k < k_uses; ++k) {
    CMat w(nr, n_rf);
    for (int j = 0; j < n_rf; ++j)
      for (int i = 0; i < nr; ++i) {
        double const ph = rng.uniform(0.0, two_pi);
        w(i, j) = w_mod * Cplx(std::cos(ph), std::sin(ph));
      }

    CMat f_analog(nt, n_rf);
    for (int j = 0; j < n_rf; ++j)
      for (int i = 0; i < nt; ++i) {
        double const ph = rng.uniform(0.0, two_pi);
        f_analog(i, j) = f_mod * Cplx(std::cos(ph), std::sin(ph));
      }

    // all-ones pilot through the analog stage, digital gain sets ||f|| = 1
    CVec pilot = CVec::Constant(n_rf, Cplx(1.0 / std::sqrt(static_cast<double>(n_rf)), 0.0));
    CVec f = f_analog * pilot;
    f /= f.norm();

    cb.combiners.push_back(std::move(w));
    cb.precoders.push_back(std::move(f));
  }
  return cb;
}

/// Linear sampling map: stacks W_k^H * x * f_k over all channel uses.
inline CVec affine_map(const SoundingCodebook& cb, const CMat& x)
{
  if (x.rows() != cb.nr || x.cols() != cb.nt)
    throw std::invalid_argument("affine_map: matrix dimensions do not match the codebook");
  CVec y(static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf);
  for (int k = 0; k < cb.k_uses; ++k)
    y.segment(static_cast<Eigen::Index>(k) * cb.n_rf, cb.n_rf).noalias() =
        cb.combiners[k].adjoint() * (x * cb.precoders[k]);
  return y;
}

/// Adjoint of affine_map: r -> sum_k W_k * r_k * f_k^H.
inline CMat affine_map_adjoint(const SoundingCodebook& cb, const CVec& r)
{
  if (r.size() != static_cast<Eigen::Index>(cb.k_uses) * cb.n_rf)
    throw std::invalid_argument("affine_map_adjoint: vector length does not match the codebook");
  CMat x = CMat::Zero(cb.nr, cb.nt);
  for (int k = 0; k < cb.k_uses; ++k)
    x.noalias() += (cb.combiners[k] * r.segment(static_cast<Eigen::Index>(k) * cb.n_rf, cb.n_rf)) *
                   cb.precoders[k].adjoint();
  return x;
}

/// Splits a stacked sample vector into its K per-use blocks.
inline std::vector<CVec> per_use_blocks(const CVec& values, int n_rf)
{
  if (n_rf < 1 || values.size() % n_rf != 0)
    throw std::invalid_argument("per_use_blocks: length is not a multiple of n_rf");
  std::vector<CVec> blocks;
  blocks.reserve(static_cast<std::size_t>(values.size() / n_rf));
  for (Eigen::Index k = 0; k * n_rf < values.size(); ++k) blocks.push_back(values.segment(k * n_rf, n_rf));
  return blocks;
}

/// Sounds the channel: y_k = W_k^H H f_k + W_k^H n_k with n_k i.i.d. CN(0, noise_var I).
/// The noise stays colored by W_k^H; no whitening is applied.
inline SampleVector sound_channel(const ChannelMatrix& channel, const SoundingCodebook& cb, double noise_var,
                                  RngStream& rng)
{
  if (noise_var < 0.0) throw std::invalid_argument("sound_channel: noise_var must be nonnegative");
  SampleVector s;
  s.noise_var = noise_var;
  s.values = affine_map(cb, channel.entries);
  if (noise_var > 0.0) {
    double const sigma = std::sqrt(noise_var);
    CVec n(cb.nr);
    for (int k = 0; k < cb.k_uses; ++k) {
      for (int i = 0; i < cb.nr; ++i) n(i) = sigma * rng.cnormal();
      s.values.segment(static_cast<Eigen::Index>(k) * cb.n_rf, cb.n_rf).noalias() += cb.combiners[k].adjoint() * n;
    }
  }
  return s;
}

/// SNR (linear) and noise variance are reciprocal under the unit-norm probe
/// construction used by generate_codebook.
inline double snr_db_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace mmce
