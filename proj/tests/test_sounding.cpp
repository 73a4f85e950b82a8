#include <catch2/catch.hpp>
#include <numbers>

#include "mmce/channel.hpp"
#include "mmce/sounding.hpp"
#include "oracles.hpp"

using namespace mmce;

TEST_CASE("min_channel_uses arithmetic", "[sounding]")
{
  REQUIRE(min_channel_uses(3, 16, 64, 4) == 57.75);  // 3*77/4, exact in binary
  REQUIRE(min_channel_uses(1, 1, 1, 1) == 1.0);
  REQUIRE(min_channel_uses(2, 8, 16, 2) == 22.0);
  REQUIRE_THROWS_AS(min_channel_uses(5, 4, 8, 2), std::invalid_argument);
}

TEST_CASE("generate_codebook satisfies the hardware constraints", "[sounding]")
{
  RngStream rng(3);
  auto const cb = generate_codebook(16, 64, 4, 100, rng);
  REQUIRE(cb.combiners.size() == 100);
  REQUIRE(cb.precoders.size() == 100);
  REQUIRE(cb.combiners[0].rows() == 16);
  REQUIRE(cb.combiners[0].cols() == 4);
  REQUIRE(cb.precoders[0].size() == 64);

  double const w_mod = 1.0 / 4.0;  // 1/sqrt(16)
  for (const auto& w : cb.combiners)
    for (Eigen::Index i = 0; i < w.size(); ++i) REQUIRE(std::abs(std::abs(w(i)) - w_mod) < 1e-12);
  for (const auto& f : cb.precoders) {
    REQUIRE(f.norm() <= 1.0 + 1e-12);
    REQUIRE(f.norm() == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("generate_codebook is deterministic under the seed", "[sounding]")
{
  RngStream a(9), b(9), c(10);
  auto const cb1 = generate_codebook(4, 8, 2, 5, a);
  auto const cb2 = generate_codebook(4, 8, 2, 5, b);
  auto const cb3 = generate_codebook(4, 8, 2, 5, c);
  for (int k = 0; k < 5; ++k) {
    REQUIRE((cb1.combiners[k].array() == cb2.combiners[k].array()).all());
    REQUIRE((cb1.precoders[k].array() == cb2.precoders[k].array()).all());
  }
  REQUIRE(!(cb1.combiners[0].array() == cb3.combiners[0].array()).all());
}

TEST_CASE("affine_map agrees with the per-entry reference", "[sounding]")
{
  RngStream rng(21);
  auto const cb = generate_codebook(4, 6, 2, 3, rng);

  SECTION("zero maps to zero")
  {
    REQUIRE(affine_map(cb, CMat::Zero(4, 6)).norm() == 0.0);
  }
  SECTION("random matrix")
  {
    CMat x(4, 6);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 6; ++j) x(i, j) = rng.cnormal();
    CVec const y = affine_map(cb, x);
    CVec const ref = oracles::affine_map_reference(cb, x);
    REQUIRE((y - ref).norm() <= 1e-12 * ref.norm());
  }
  SECTION("dimension mismatch is rejected")
  {
    REQUIRE_THROWS_AS(affine_map(cb, CMat::Zero(5, 6)), std::invalid_argument);
  }
}

TEST_CASE("identity codebook selects the first column", "[sounding]")
{
  // constraints deliberately relaxed: W = I, f = e_0
  SoundingCodebook cb;
  cb.k_uses = 1;
  cb.n_rf = 4;
  cb.nr = 4;
  cb.nt = 6;
  cb.combiners.push_back(CMat::Identity(4, 4));
  cb.precoders.push_back(CVec::Unit(6, 0));

  RngStream rng(2);
  CMat x(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) x(i, j) = rng.cnormal();
  REQUIRE((affine_map(cb, x) - x.col(0)).norm() < 1e-15);
}

TEST_CASE("affine_map is linear", "[sounding]")
{
  RngStream rng(31);
  auto const cb = generate_codebook(5, 7, 2, 4, rng);
  for (int t = 0; t < 20; ++t) {
    CMat x(5, 7), y(5, 7);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 7; ++j) {
        x(i, j) = rng.cnormal();
        y(i, j) = rng.cnormal();
      }
    Cplx const a = rng.cnormal(), b = rng.cnormal();
    CVec const lhs = affine_map(cb, a * x + b * y);
    CVec const rhs = a * affine_map(cb, x) + b * affine_map(cb, y);
    REQUIRE((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("sound_channel is exact at zero noise", "[sounding]")
{
  RngStream root(17);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(6, 10, 2, ch_rng);
  auto const cb = generate_codebook(6, 10, 2, 12, cb_rng);
  auto const s = sound_channel(ch, cb, 0.0, n_rng);
  REQUIRE(s.noise_var == 0.0);
  REQUIRE((s.values - affine_map(cb, ch.entries)).norm() == 0.0);

  // block layout: block k recomputes W_k^H H f_k
  auto const blocks = per_use_blocks(s.values, cb.n_rf);
  for (int k = 0; k < cb.k_uses; ++k) {
    CVec const direct = cb.combiners[k].adjoint() * ch.entries * cb.precoders[k];
    REQUIRE((blocks[k] - direct).norm() < 1e-14);
  }
}

TEST_CASE("per-block noise covariance matches the model", "[sounding]")
{
  // unitary-column combiner makes the colored covariance exactly sigma^2 I
  RngStream root(23);
  int const nr = 6, n_rf = 2;
  CMat g(nr, n_rf);
  auto grng = root.split(0);
  for (int j = 0; j < n_rf; ++j)
    for (int i = 0; i < nr; ++i) g(i, j) = grng.cnormal();
  Eigen::HouseholderQR<CMat> qr(g);
  CMat const q = qr.householderQ() * CMat::Identity(nr, n_rf);

  SoundingCodebook cb;
  cb.k_uses = 1;
  cb.n_rf = n_rf;
  cb.nr = nr;
  cb.nt = 4;
  cb.combiners.push_back(q);
  cb.precoders.push_back(CVec::Unit(4, 0));

  ChannelMatrix zero_ch;
  zero_ch.nr = nr;
  zero_ch.nt = 4;
  zero_ch.entries = CMat::Zero(nr, 4);
  zero_ch.paths = {{Cplx(0, 0), 0.0, 0.0}};

  auto n_rng = root.split(1);
  int const n_draws = 10000;
  Eigen::Matrix2cd cov = Eigen::Matrix2cd::Zero();
  for (int t = 0; t < n_draws; ++t) {
    auto const s = sound_channel(zero_ch, cb, 1.0, n_rng);
    cov += s.values * s.values.adjoint();
  }
  cov /= double(n_draws);
  CHECK(cov(0, 0).real() == Approx(1.0).margin(0.05));
  CHECK(cov(1, 1).real() == Approx(1.0).margin(0.05));
  CHECK(std::abs(cov(0, 1)) < 0.05);
}

TEST_CASE("snr maps to noise variance reciprocally", "[sounding]")
{
  REQUIRE(snr_db_to_noise_var(0.0) == 1.0);
  REQUIRE(snr_db_to_noise_var(10.0) == Approx(0.1));
  REQUIRE(snr_db_to_noise_var(-10.0) == Approx(10.0));
  RngStream rng(4);
  REQUIRE_THROWS_AS(
      sound_channel(generate_channel(2, 2, 1, rng), generate_codebook(2, 2, 1, 2, rng), -0.5, rng),
      std::invalid_argument);
}
