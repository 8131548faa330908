#include "asense/casr.hpp"

#include "asense/estimators.hpp"

#include <algorithm>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace asense;
using namespace asense::casr;
using asense::testing::los_dynamic_scene;
using asense::testing::random_trace;
using asense::testing::small_grid;
using asense::testing::zero_trace;

TEST_SUITE("casr") {

TEST_CASE("identical antennas give a unit ratio") {
  OfdmGrid grid = small_grid(4, 2, 1);
  Path p;                 // broadside: zero steering phase on every element
  p.delayS = 120e-9;
  p.dopplerHz = 3.0;
  p.amplitude = {0.7, 0.4};
  const int T = 16;
  const CsiTensor csi = synthesize_csi({p}, grid, random_trace(grid, T, 4), T);
  const RatioSeries r = csi_ratio(csi, 0, 2, 1, 0);
  for (const cplx& v : r.values) CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-12);
}

TEST_CASE("csi ratio is exactly clock invariant") {
  const auto scene = los_dynamic_scene(10.0, 7.0, 220e-9, 3, 8, 2);
  const int T = 32;
  const CsiTensor a = synthesize_csi(scene.paths, scene.grid, random_trace(scene.grid, T, 1), T);
  const CsiTensor b = synthesize_csi(scene.paths, scene.grid, random_trace(scene.grid, T, 2), T);
  const RatioSeries ra = csi_ratio(a, 0, 2, 1, 0);
  const RatioSeries rb = csi_ratio(b, 0, 2, 1, 0);
  for (size_t t = 0; t < ra.values.size(); ++t)
    CHECK(std::abs(ra.values[t] - rb.values[t]) < 1e-12);
}

TEST_CASE("csi ratio rejects bad antenna choices and tiny denominators") {
  const auto scene = los_dynamic_scene(10.0, 7.0, 220e-9, 3, 8, 2);
  const CsiTensor csi = synthesize_csi(scene.paths, scene.grid, zero_trace(8), 8);
  CHECK_THROWS_AS(csi_ratio(csi, 0, 0, 0, 0), Error);  // p == ref
  CHECK_THROWS_AS(csi_ratio(csi, 0, 5, 0, 0), Error);

  CsiTensor zeroRef = csi;
  for (int t = 0; t < 8; ++t) zeroRef.at(3, t, 0, 0) = 0.0;
  CHECK_THROWS_AS(csi_ratio(zeroRef, 0, 3, 1, 0), Error);
}

TEST_CASE("single dynamic path sweeps a circle in the ratio plane") {
  // Moebius image of the rotating phasor: residual vanishes without noise
  const auto scene = los_dynamic_scene(6.0, 2.0, 180e-9, 9, 4, 2);
  const int T = 400;  // 4 s, 8 full rotations at 2 Hz
  const CsiTensor csi = synthesize_csi(scene.paths, scene.grid, random_trace(scene.grid, T, 5), T);
  const RatioSeries r = csi_ratio(csi, 0, 2, 1, 0);
  const CircleFit fit = fit_circle(r.values);
  CHECK(fit.rmsResidual < 1e-6 * fit.radius);
}

TEST_CASE("circle fit on three exact points and degenerate inputs") {
  const std::vector<cplx> exact = {cplx(1, 0), cplx(0, 1), cplx(-1, 0)};
  const CircleFit fit = fit_circle(exact);
  CHECK(std::abs(fit.center) < 1e-10);
  CHECK(fit.radius == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.rmsResidual < 1e-10);

  CHECK_THROWS_AS(fit_circle({cplx(0, 0), cplx(1, 1), cplx(2, 2)}), Error);  // collinear
  CHECK_THROWS_AS(fit_circle({cplx(0, 0), cplx(1, 1)}), Error);
}

TEST_CASE("noisy circle fit recovers the radius") {
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(2000 + static_cast<uint64_t>(seed));
    std::vector<cplx> pts;
    for (int i = 0; i < 200; ++i) {
      const double ang = kTwoPi * i / 200.0;
      pts.push_back(std::polar(1.0, ang) + cplx(gaussian(rng, 0, 0.01), gaussian(rng, 0, 0.01)));
    }
    const CircleFit fit = fit_circle(pts);
    CHECK(std::abs(fit.radius - 1.0) < 0.01);
  }
}

TEST_CASE("constant series has zero rotation rate") {
  RatioSeries series;
  series.values.assign(50, cplx(1.0, 0.0));
  CircleFit fit;
  fit.center = cplx(0.0, 0.0);
  fit.radius = 1.0;
  fit.rmsResidual = 0.0;
  const RotationEstimate est = arc_rotation_rate(series, fit, 5e-3);
  CHECK(est.dopplerHz == doctest::Approx(0.0));
  CHECK(est.direction == 0);
}

TEST_CASE("arc rotation recovers a 2 Hz Doppler and flips with its sign") {
  for (double truth : {2.0, -2.0}) {
    auto scene = los_dynamic_scene(6.0, truth, 180e-9, 11, 4, 2);
    const int T = 400;
    const CsiTensor csi =
        synthesize_csi(scene.paths, scene.grid, random_trace(scene.grid, T, 6), T);
    const RatioSeries r = csi_ratio(csi, 0, 2, 1, 0);
    const CircleFit fit = fit_circle(r.values);
    const RotationEstimate est = arc_rotation_rate(r, fit, scene.grid.blockPeriodS);
    CHECK(std::abs(est.dopplerHz - truth) < 0.05);
    CHECK(est.direction == (truth > 0 ? 1 : -1));
  }
}

TEST_CASE("arc rotation enforces its fit-quality preconditions") {
  RatioSeries series;
  series.values.assign(50, cplx(1.0, 0.0));
  CircleFit bad;
  bad.center = cplx(0.0, 0.0);
  bad.radius = 1.0;
  bad.rmsResidual = 0.5;  // residual above 0.2 * radius
  CHECK_THROWS_AS(arc_rotation_rate(series, bad, 5e-3), Error);

  CircleFit tiny;
  tiny.radius = 1e-15;
  CHECK_THROWS_AS(arc_rotation_rate(series, tiny, 5e-3), Error);
}

TEST_CASE("static background is exact for frozen static channels") {
  OfdmGrid grid = small_grid(8, 2, 1);
  Path los;
  los.delayS = 60e-9;
  los.amplitude = {1.0, -0.2};
  Path wall;
  wall.delayS = 210e-9;
  wall.amplitude = {0.3, 0.4};
  wall.aoaRad = 0.5;
  const int T = 32;
  const CsiTensor csi = synthesize_csi({los, wall}, grid, zero_trace(T), T);
  const BackgroundEstimate bg = static_background(csi, /*clocksFrozen=*/true);
  CHECK(bg.valid);
  for (int n = 0; n < 8; ++n)
    for (int p = 0; p < 2; ++p)
      CHECK(std::abs(bg.values[bg.index(n, p, 0, grid)] - csi.at(n, 0, p, 0)) < 1e-12);
}

TEST_CASE("static background averages out whole rotation cycles") {
  auto scene = los_dynamic_scene(6.0, 2.0, 180e-9, 13, 4, 2);
  const int T = 400;  // exactly 4 cycles of 2 Hz at Ts = 5 ms
  const CsiTensor csi = synthesize_csi(scene.paths, scene.grid, zero_trace(T), T);
  const CsiTensor staticOnly = synthesize_csi({scene.paths[0]}, scene.grid, zero_trace(T), T);
  const BackgroundEstimate bg = static_background(csi, /*clocksFrozen=*/true);
  for (int n = 0; n < 4; ++n)
    for (int p = 0; p < 2; ++p) {
      const cplx truth = staticOnly.at(n, 0, p, 0);
      CHECK(std::abs(bg.values[bg.index(n, p, 0, scene.grid)] - truth) < 1e-3 * std::abs(truth));
    }
}

TEST_CASE("plain temporal mean is flagged invalid under per-block random phase") {
  const auto scene = los_dynamic_scene(6.0, 2.0, 180e-9, 17, 4, 2);
  const int T = 64;
  const CsiTensor csi = synthesize_csi(scene.paths, scene.grid, random_trace(scene.grid, T, 3), T);
  const BackgroundEstimate plainMean = static_background(csi, false, /*preAlignPhase=*/false);
  CHECK_FALSE(plainMean.valid);
  CHECK_THROWS_AS(linearized_ratio(csi, plainMean), Error);

  const BackgroundEstimate aligned = static_background(csi, false, true);
  CHECK(aligned.valid);
}

TEST_CASE("linearized ratios superpose exactly in ground-truth mode") {
  OfdmGrid grid = small_grid(4, 2, 1);
  const int T = 250;
  Path los;
  los.delayS = 50e-9;
  los.amplitude = {1.0, 0.0};
  Path d1;
  d1.delayS = 200e-9;
  d1.dopplerHz = 0.9;
  d1.amplitude = {0.2, 0.1};
  d1.aoaRad = 0.4;
  Path d2;
  d2.delayS = 320e-9;
  d2.dopplerHz = 1.7;
  d2.amplitude = {0.15, -0.1};
  d2.aoaRad = -0.6;

  const auto trace = random_trace(grid, T, 9);
  const CsiTensor sOnly = synthesize_csi({los}, grid, trace, T);
  const CsiTensor withD1 = synthesize_csi({los, d1}, grid, trace, T);
  const CsiTensor withD2 = synthesize_csi({los, d2}, grid, trace, T);
  const CsiTensor withBoth = synthesize_csi({los, d1, d2}, grid, trace, T);

  const auto rBoth = linearized_ratio_truth(withBoth, sOnly);
  const auto r1 = linearized_ratio_truth(withD1, sOnly);
  const auto r2 = linearized_ratio_truth(withD2, sOnly);
  REQUIRE(rBoth.size() == r1.size());
  for (size_t k = 0; k < rBoth.size(); ++k)
    for (int t = 0; t < T; ++t) {
      const cplx lhs = rBoth[k].values[static_cast<size_t>(t)] - cplx(1.0, 0.0);
      const cplx rhs = (r1[k].values[static_cast<size_t>(t)] - cplx(1.0, 0.0)) +
                       (r2[k].values[static_cast<size_t>(t)] - cplx(1.0, 0.0));
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }

  // no dynamic content: the ratio is exactly one
  const auto rNone = linearized_ratio_truth(sOnly, sOnly);
  for (const auto& series : rNone)
    for (const cplx& v : series.values) CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-12);
}

TEST_CASE("two-person scene shows exactly the two source tones") {
  OfdmGrid grid = small_grid(4, 2, 1);
  const int T = 2000;  // 10 s capture resolves 0.2 Hz vs 0.33 Hz
  Path los;
  los.delayS = 50e-9;
  los.amplitude = {1.0, 0.0};
  Path p1;
  p1.delayS = 220e-9;
  p1.dopplerHz = 0.2;
  p1.amplitude = {0.2, 0.05};
  p1.aoaRad = 0.5;
  Path p2;
  p2.delayS = 350e-9;
  p2.dopplerHz = 0.33;
  p2.amplitude = {0.18, -0.06};
  p2.aoaRad = -0.3;

  const auto trace = random_trace(grid, T, 15);
  const CsiTensor sOnly = synthesize_csi({los}, grid, trace, T);
  const CsiTensor mix = synthesize_csi({los, p1, p2}, grid, trace, T);
  const auto ratios = linearized_ratio_truth(mix, sOnly);

  // incoherent average of per-series spectra of (R - 1)
  const int K = 4096;
  const double Ts = grid.blockPeriodS;
  std::vector<double> axis(K), power(K, 0.0);
  for (int j = 0; j < K; ++j) axis[static_cast<size_t>(j)] = -1.0 + 2.0 * j / K;
  for (const auto& series : ratios) {
    for (int j = 0; j < K; ++j) {
      cplx acc = 0.0;
      for (int t = 0; t < T; ++t)
        acc += (series.values[static_cast<size_t>(t)] - cplx(1.0, 0.0)) *
               std::polar(1.0, -kTwoPi * axis[static_cast<size_t>(j)] * t * Ts);
      power[static_cast<size_t>(j)] += std::norm(acc);
    }
  }
  const auto peaks = peak_extract_1d(axis, power, 3, 0.02);
  REQUIRE(peaks.size() >= 2);
  std::vector<double> freqs = {peaks[0].first, peaks[1].first};
  std::sort(freqs.begin(), freqs.end());
  // cross-tone leakage pulls the maxima by a few millihertz
  CHECK(std::abs(freqs[0] - 0.2) <= 0.01);
  CHECK(std::abs(freqs[1] - 0.33) <= 0.01);
  if (peaks.size() > 2) CHECK(peaks[2].second < 0.1 * peaks[0].second);
}

TEST_CASE("series smoothing preserves a slow arc") {
  std::vector<cplx> vals;
  for (int t = 0; t < 100; ++t) vals.push_back(std::polar(1.0, 0.02 * t));
  const auto smooth = smooth_series(vals, 9);
  CHECK(smooth.size() == vals.size() - 8);
  // shrunk radius, same rotation rate
  for (size_t i = 1; i < smooth.size(); ++i)
    CHECK(std::arg(smooth[i] / smooth[i - 1]) == doctest::Approx(0.02).epsilon(1e-6));
  CHECK_THROWS_AS(smooth_series(vals, 101), Error);
}

}  // TEST_SUITE
