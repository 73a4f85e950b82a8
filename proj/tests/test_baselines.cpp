#include <catch2/catch.hpp>

#include "mmce/baselines.hpp"
#include "mmce/channel.hpp"
#include "mmce/sounding.hpp"
#include "oracles.hpp"

using namespace mmce;

namespace {

CMat random_cmat(RngStream& rng, int rows, int cols)
{
  CMat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.cnormal();
  return m;
}

}  // namespace

TEST_CASE("subspace_scan picks the strongest sample", "[baselines]")
{
  auto vec1 = [](double re) {
    CVec v(1);
    v(0) = Cplx(re, 0);
    return v;
  };
  SECTION("direct argmax, squared norms 1, 5, 3")
  {
    std::vector<CVec> ys = {vec1(1.0), vec1(std::sqrt(5.0)), vec1(std::sqrt(3.0))};
    auto const out = subspace_scan(ys);
    REQUIRE(out.k_opt == 2);
    REQUIRE(out.powers[1] == Approx(5.0));
  }
  SECTION("ties break toward the lowest index")
  {
    std::vector<CVec> ys = {vec1(2.0), vec1(2.0), vec1(2.0)};
    REQUIRE(subspace_scan(ys).k_opt == 1);
  }
  SECTION("empty input is an error")
  {
    REQUIRE_THROWS_AS(subspace_scan({}), std::invalid_argument);
  }
  SECTION("selection is invariant under positive scaling")
  {
    RngStream rng(8);
    std::vector<CVec> ys;
    for (int k = 0; k < 6; ++k) {
      CVec v(3);
      for (int i = 0; i < 3; ++i) v(i) = rng.cnormal();
      ys.push_back(v);
    }
    int const base = subspace_scan(ys).k_opt;
    for (auto& v : ys) v *= 17.0;
    REQUIRE(subspace_scan(ys).k_opt == base);
  }
}

TEST_CASE("scan finds the pair aligned with the dominant direction", "[baselines]")
{
  // rank-one channel; pair j sees it head on, every other probe is orthogonal
  RngStream rng(9);
  int const nr = 6, nt = 8, n_rf = 2, k_uses = 5, aligned = 3;
  CVec u = random_cmat(rng, nr, 1).col(0);
  u.normalize();
  CVec v = random_cmat(rng, nt, 1).col(0);
  v.normalize();

  ChannelMatrix ch;
  ch.nr = nr;
  ch.nt = nt;
  ch.entries = 4.0 * (u * v.adjoint());
  ch.paths = {{Cplx(1, 0), 0.0, 0.0}};

  // orthonormal complement of v hosts the misaligned probes
  CMat basis(nt, nt);
  basis.col(0) = v;
  basis.rightCols(nt - 1) = random_cmat(rng, nt, nt - 1);
  Eigen::HouseholderQR<CMat> qr(basis);
  CMat const q = qr.householderQ() * CMat::Identity(nt, nt);

  SoundingCodebook cb;
  cb.k_uses = k_uses;
  cb.n_rf = n_rf;
  cb.nr = nr;
  cb.nt = nt;
  for (int k = 0; k < k_uses; ++k) {
    CMat w(nr, n_rf);
    w.col(0) = u;
    w.col(1) = random_cmat(rng, nr, 1).col(0).normalized();
    cb.combiners.push_back(w);
    cb.precoders.push_back(k == aligned ? CVec(q.col(0)) : CVec(q.col(1 + k)));
  }

  auto n_rng = rng.split(1);
  auto const s = sound_channel(ch, cb, 0.0, n_rng);
  auto const out = subspace_scan(per_use_blocks(s.values, n_rf));
  REQUIRE(out.k_opt == aligned + 1);
  for (int k = 0; k < k_uses; ++k)
    if (k != aligned) REQUIRE(out.powers[k] < 1e-20);
}

TEST_CASE("scan_estimate reproduces its selected block", "[baselines]")
{
  RngStream root(10);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(6, 10, 2, ch_rng);
  auto const cb = generate_codebook(6, 10, 2, 8, cb_rng);
  auto const s = sound_channel(ch, cb, 0.1, n_rng);

  CMat const h = scan_estimate(cb, s);
  auto const blocks = per_use_blocks(s.values, cb.n_rf);
  int const k = subspace_scan(blocks).k_opt - 1;
  CVec const replay = cb.combiners[k].adjoint() * h * cb.precoders[k];
  REQUIRE((replay - blocks[k]).norm() <= 1e-10 * blocks[k].norm());
}

TEST_CASE("matrix factorization recovers a noiseless rank-one channel", "[baselines]")
{
  RngStream root(20);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(4, 4, 1, ch_rng);
  auto const cb = generate_codebook(4, 4, 2, 8, cb_rng);  // 16 samples >= 8 unknowns
  auto const s = sound_channel(ch, cb, 0.0, n_rng);

  SolverConfig cfg;
  cfg.max_iters = 200;
  cfg.stagnation_tol = 1e-13;
  auto const res = mf_estimate(s, cb, 1, cfg, RngStream(5));
  double const err = (res.h_est - ch.entries).squaredNorm() / ch.entries.squaredNorm();
  REQUIRE(err <= 1e-6);
}

TEST_CASE("matrix factorization objective never increases", "[baselines]")
{
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    RngStream root(seed);
    auto ch_rng = root.split(0);
    auto cb_rng = root.split(1);
    auto n_rng = root.split(2);
    auto const ch = generate_channel(6, 12, 2, ch_rng);
    auto const cb = generate_codebook(6, 12, 2, 24, cb_rng);
    auto const s = sound_channel(ch, cb, 0.5, n_rng);

    SolverConfig cfg;
    cfg.max_iters = 20;
    cfg.stagnation_tol = 1e-300;
    auto const res = mf_estimate(s, cb, 3, cfg, RngStream(seed));
    auto const& obj = res.trace.objective;
    for (std::size_t i = 1; i < obj.size(); ++i) REQUIRE(obj[i] <= obj[i - 1] + 1e-9);
  }
}

TEST_CASE("svt surrogate shrinks everything to zero for huge regularization", "[baselines]")
{
  RngStream root(40);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(4, 6, 1, ch_rng);
  auto const cb = generate_codebook(4, 6, 2, 10, cb_rng);
  auto const s = sound_channel(ch, cb, 0.0, n_rng);

  double const step = 0.9 / std::pow(affine_map_op_norm(cb), 2);
  auto const res = nnm_svt_estimate(s, cb, 1e9, step, 10);
  REQUIRE(res.h_est.norm() == 0.0);
}

TEST_CASE("svt surrogate with zero regularization approaches the least-squares fit", "[baselines]")
{
  // injective map: 15 samples for 12 unknowns
  RngStream root(41);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(3, 4, 1, ch_rng);
  auto const cb = generate_codebook(3, 4, 3, 5, cb_rng);
  auto const s = sound_channel(ch, cb, 0.3, n_rng);

  // explicit design matrix from the entrywise reference, solved by QR
  CMat design(15, 12);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 3; ++i) {
      CMat e = CMat::Zero(3, 4);
      e(i, j) = 1.0;
      design.col(j * 3 + i) = oracles::affine_map_reference(cb, e);
    }
  CVec const ls = design.colPivHouseholderQr().solve(s.values);
  double const ls_obj = 0.5 * (s.values - design * ls).squaredNorm();

  double const step = 0.9 / std::pow(affine_map_op_norm(cb), 2);
  auto const res = nnm_svt_estimate(s, cb, 0.0, step, 20000);
  double const obj = 0.5 * (s.values - affine_map(cb, res.h_est)).squaredNorm();
  REQUIRE(obj <= ls_obj + 1e-6);
  REQUIRE(obj >= ls_obj - 1e-9);
}

TEST_CASE("svt surrogate recovers a small noiseless low-rank instance", "[baselines]")
{
  RngStream root(42);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(6, 8, 2, ch_rng);
  auto const cb = generate_codebook(6, 8, 2, 30, cb_rng);  // 60 samples, 48 unknowns
  auto const s = sound_channel(ch, cb, 0.0, n_rng);

  double const step = 0.9 / std::pow(affine_map_op_norm(cb), 2);
  auto const res = nnm_svt_estimate(s, cb, 1e-4, step, 4000);
  double const err = (res.h_est - ch.entries).squaredNorm() / ch.entries.squaredNorm();
  REQUIRE(err <= 1e-3);
}

TEST_CASE("svt surrogate objective is monotone and thresholding reduces rank", "[baselines]")
{
  RngStream root(43);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(5, 7, 2, ch_rng);
  auto const cb = generate_codebook(5, 7, 2, 20, cb_rng);
  auto const s = sound_channel(ch, cb, 0.2, n_rng);

  double const step = 0.9 / std::pow(affine_map_op_norm(cb), 2);
  auto const res = nnm_svt_estimate(s, cb, 2.0, step, 200);
  for (std::size_t i = 1; i < res.objective.size(); ++i) REQUIRE(res.objective[i] <= res.objective[i - 1] + 1e-9);
  REQUIRE(oracles::numerical_rank(res.h_est, 1e-10) < 5);
}

TEST_CASE("svt surrogate halves a divergent step", "[baselines]")
{
  RngStream root(44);
  auto ch_rng = root.split(0);
  auto cb_rng = root.split(1);
  auto n_rng = root.split(2);
  auto const ch = generate_channel(4, 6, 1, ch_rng);
  auto const cb = generate_codebook(4, 6, 2, 10, cb_rng);
  auto const s = sound_channel(ch, cb, 0.1, n_rng);

  double const safe = 0.9 / std::pow(affine_map_op_norm(cb), 2);
  auto const res = nnm_svt_estimate(s, cb, 1e-3, 50.0 * safe, 300);
  REQUIRE(res.step_used < 50.0 * safe);
  REQUIRE(res.h_est.allFinite());
}

TEST_CASE("op-norm estimate upper-bounds the map on random inputs", "[baselines]")
{
  RngStream rng(45);
  auto cb_rng = rng.split(0);
  auto const cb = generate_codebook(5, 9, 2, 12, cb_rng);
  double const opn = affine_map_op_norm(cb, 100);
  for (int t = 0; t < 10; ++t) {
    CMat const x = random_cmat(rng, 5, 9);
    REQUIRE(affine_map(cb, x).norm() <= opn * x.norm() * (1.0 + 1e-6));
  }
}
