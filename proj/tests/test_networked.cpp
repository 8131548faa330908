#include "asense/networked.hpp"

#include <algorithm>

#include "doctest.h"

using namespace asense;
using namespace asense::net;

namespace {

RruSet ring_rrus(int count, double radius, Rng& rng, double jitter = 0.3) {
  RruSet rrus;
  for (int i = 0; i < count; ++i) {
    const double ang = kTwoPi * i / count + uniform(rng, -jitter, jitter);
    rrus.positions.push_back({radius * std::cos(ang), radius * std::sin(ang)});
  }
  return rrus;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_SUITE("networked") {

TEST_CASE("tdoa removes any offset common to the rrus") {
  ToaFrame frame;
  frame.toasS.resize(2, 3);
  frame.toasS << 1e-7, 2e-7, 4e-7,
                 2e-7, 3e-7, 7e-7;
  const TdoaSet base = toa_to_tdoa(frame, 0);
  CHECK(base.valuesS.cols() == 2);  // three RRUs give two TDOAs
  CHECK(base.rruIndices == std::vector<int>({1, 2}));

  ToaFrame shifted = frame;
  shifted.toasS.col(0).array() += 5e-6;
  shifted.toasS.col(1).array() += 5e-6;
  shifted.toasS.col(2).array() += 5e-6;
  const TdoaSet after = toa_to_tdoa(shifted, 0);
  // cancellation is exact up to the rounding of the shifted sums
  CHECK((after.valuesS - base.valuesS).cwiseAbs().maxCoeff() < 1e-20);

  CHECK_THROWS_AS(toa_to_tdoa(frame, 5), Error);
}

TEST_CASE("equidistant rrus see a zero tdoa") {
  const Vec2 tx{0.0, -10.0};
  const Vec2 target{0.0, 0.0};
  RruSet rrus;
  rrus.positions = {{3.0, 4.0}, {-3.0, 4.0}};
  ToaFrame frame;
  frame.toasS.resize(1, 2);
  for (int i = 0; i < 2; ++i) frame.toasS(0, i) = bistatic_toa(tx, target, rrus.positions[i]);
  const TdoaSet tdoas = toa_to_tdoa(frame, 0);
  CHECK(std::abs(tdoas.valuesS(0, 0)) < 1e-18);
}

TEST_CASE("gauss-newton recovers the target from noiseless tdoas") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(300 + static_cast<uint64_t>(seed));
    const RruSet rrus = ring_rrus(4, uniform(rng, 20.0, 40.0), rng);
    const Vec2 tx{0.0, -15.0};
    const Vec2 truth{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)};

    ToaFrame frame;
    frame.toasS.resize(1, 4);
    for (int i = 0; i < 4; ++i) frame.toasS(0, i) = bistatic_toa(tx, truth, rrus.positions[i]);
    const TdoaSet tdoas = toa_to_tdoa(frame, 0);
    std::vector<double> row(static_cast<size_t>(tdoas.valuesS.cols()));
    for (int k = 0; k < tdoas.valuesS.cols(); ++k) row[static_cast<size_t>(k)] = tdoas.valuesS(0, k);

    const double ang = uniform(rng, 0.0, kTwoPi);
    const Vec2 init = truth + Vec2{5.0 * std::cos(ang), 5.0 * std::sin(ang)};
    const TdoaSolveResult sol = solve_tdoa(row, rrus, 0, tx, init);
    CHECK(distance(sol.position, truth) < 1e-6);
    CHECK(sol.finalResidualS < 1e-15);
  }
}

TEST_CASE("symmetric degeneracy at the transmitter converges with a warning") {
  Rng rng(9);
  RruSet rrus = ring_rrus(5, 30.0, rng, 0.0);
  const Vec2 tx{0.0, 0.0};
  const std::vector<double> zeros(4, 0.0);
  const TdoaSolveResult sol = solve_tdoa(zeros, rrus, 0, tx, Vec2{0.4, -0.3});
  CHECK(distance(sol.position, tx) < 1e-6);
  CHECK(sol.finalResidualS < 1e-12);
  CHECK(!sol.warnings.empty());
}

TEST_CASE("collinear rrus are flagged") {
  RruSet rrus;
  rrus.positions = {{-10.0, 0.0}, {0.0, 0.0}, {10.0, 0.0}};
  const Vec2 tx{0.0, -15.0};
  const Vec2 truth{1.0, 5.0};
  std::vector<double> tdoas;
  for (int i = 1; i < 3; ++i)
    tdoas.push_back(bistatic_toa(tx, truth, rrus.positions[static_cast<size_t>(i)]) -
                    bistatic_toa(tx, truth, rrus.positions[0]));
  const TdoaSolveResult sol = solve_tdoa(tdoas, rrus, 0, tx, Vec2{2.0, 6.0});
  bool flagged = false;
  for (const auto& w : sol.warnings) flagged |= w.find("collinear") != std::string::npos;
  CHECK(flagged);
  CHECK(distance(sol.position, truth) < 1e-6);  // same-side init resolves the mirror
}

TEST_CASE("tdoa noise at the nanosecond level keeps median error under a meter") {
  std::vector<double> errors;
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(700 + static_cast<uint64_t>(seed));
    const RruSet rrus = ring_rrus(5, 25.0, rng);
    const Vec2 tx{0.0, -15.0};
    const Vec2 truth{uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)};
    ToaFrame frame;
    frame.toasS.resize(1, 5);
    for (int i = 0; i < 5; ++i)
      frame.toasS(0, i) = bistatic_toa(tx, truth, rrus.positions[static_cast<size_t>(i)]) +
                          gaussian(rng, 0.0, 1e-9);
    const TdoaSet tdoas = toa_to_tdoa(frame, 0);
    std::vector<double> row(static_cast<size_t>(tdoas.valuesS.cols()));
    for (int k = 0; k < tdoas.valuesS.cols(); ++k) row[static_cast<size_t>(k)] = tdoas.valuesS(0, k);
    const TdoaSolveResult sol = solve_tdoa(row, rrus, 0, tx, truth + Vec2{2.0, -2.0});
    errors.push_back(distance(sol.position, truth));
  }
  CHECK(median_of(errors) < 1.0);
}

TEST_CASE("isoceles construction places the target at (5,5)") {
  const Vec2 x = solve_aoa({0.0, 0.0}, {10.0, 0.0}, kPi / 4.0, kPi / 4.0);
  CHECK(x.x == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(x.y == doctest::Approx(5.0).epsilon(1e-12));

  CHECK_THROWS_AS(solve_aoa({0, 0}, {10, 0}, kPi / 2, kPi / 2), Error);
  CHECK_THROWS_AS(solve_aoa({0, 0}, {10, 0}, -0.1, kPi / 4), Error);
  CHECK_THROWS_AS(solve_aoa({1, 1}, {1, 1}, kPi / 4, kPi / 4), Error);
}

TEST_CASE("aoa round trip is exact away from degeneracies") {
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(1100 + static_cast<uint64_t>(seed));
    const Vec2 u{uniform(rng, -10.0, 0.0), uniform(rng, -2.0, 2.0)};
    const Vec2 v{uniform(rng, 5.0, 15.0), uniform(rng, -2.0, 2.0)};
    const Vec2 truth{uniform(rng, -5.0, 5.0), uniform(rng, 3.0, 12.0)};
    const auto [a, b] = aoa_from_truth(u, v, truth);
    if (a < 0.05 || b < 0.05 || a + b > kPi - 0.05) continue;
    const Vec2 upper = solve_aoa(u, v, a, b, true);
    const Vec2 lower = solve_aoa(u, v, a, b, false);
    const double err = std::min(distance(upper, truth), distance(lower, truth));
    CHECK(err < 1e-9);
  }
}

TEST_CASE("degenerate em model reduces to plain toa least squares") {
  Rng rng(31);
  const RruSet rrus = ring_rrus(4, 30.0, rng);
  const Vec2 tx{0.0, -15.0};
  const Vec2 truth{2.0, -1.0};
  EmModel model;
  model.offsetWalkSigmaS = 0.0;
  model.initOffsetSigmaS = 0.0;
  model.toaNoiseSigmaS = 1e-9;

  const std::vector<Vec2> positions(20, truth);
  const ToaFrame frame = simulate_toa(rrus, tx, positions, 0.0, model, rng);
  const Vec2 init{4.0, 2.0};

  const EmResult em = em_localize(frame, rrus, tx, model, init);
  const ToaLsqResult lsq = toa_least_squares(frame, rrus, tx, init, true);
  CHECK(distance(em.trajectory[0], lsq.trajectory[0]) < 1e-6);
}

TEST_CASE("em log-likelihood never decreases") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(1500 + static_cast<uint64_t>(seed));
    const RruSet rrus = ring_rrus(4, 30.0, rng);
    const Vec2 tx{0.0, -15.0};
    const Vec2 truth{uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)};
    EmModel model;
    model.offsetWalkSigmaS = 2e-9;
    model.initOffsetSigmaS = 2e-9;
    model.toaNoiseSigmaS = 1e-9;
    const std::vector<Vec2> positions(50, truth);
    const ToaFrame frame = simulate_toa(rrus, tx, positions, 0.0, model, rng);

    const EmResult em = em_localize(frame, rrus, tx, model, truth + Vec2{2.0, 1.0});
    REQUIRE(em.logLikelihood.size() >= 2);
    for (size_t i = 1; i < em.logLikelihood.size(); ++i)
      CHECK(em.logLikelihood[i] >= em.logLikelihood[i - 1] -
                                       1e-8 * std::max(1.0, std::abs(em.logLikelihood[i - 1])));
  }
}

TEST_CASE("modelling the offset walk beats ignoring it") {
  std::vector<double> emErr, lsqErr;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(2500 + static_cast<uint64_t>(seed));
    const RruSet rrus = ring_rrus(4, 30.0, rng);
    const Vec2 tx{0.0, -15.0};
    const Vec2 truth{uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)};
    EmModel model;
    model.offsetWalkSigmaS = 2e-9;
    model.initOffsetSigmaS = 2e-9;
    model.toaNoiseSigmaS = 1e-9;
    const std::vector<Vec2> positions(50, truth);
    const ToaFrame frame = simulate_toa(rrus, tx, positions, 0.0, model, rng);
    const Vec2 init = truth + Vec2{2.0, -1.0};

    emErr.push_back(distance(em_localize(frame, rrus, tx, model, init).trajectory[0], truth));
    lsqErr.push_back(distance(toa_least_squares(frame, rrus, tx, init, true).trajectory[0], truth));
  }
  CHECK(median_of(emErr) < median_of(lsqErr));
}

TEST_CASE("simulated offsets follow the configured walk") {
  Rng rng(41);
  RruSet rrus = ring_rrus(3, 25.0, rng);
  EmModel model;
  model.offsetWalkSigmaS = 5e-9;
  model.initOffsetSigmaS = 0.0;
  model.toaNoiseSigmaS = 0.0;
  ToaSimTruth truth;
  const std::vector<Vec2> positions(400, Vec2{1.0, 1.0});
  simulate_toa(rrus, Vec2{0.0, -10.0}, positions, 0.0, model, rng, &truth);
  CHECK(truth.rruOffsetsS.row(0).cwiseAbs().maxCoeff() == 0.0);  // zero initial offsets
  // increment std across all steps and rrus should track 5 ns
  std::vector<double> increments;
  for (int t = 1; t < 400; ++t)
    for (int i = 0; i < 3; ++i)
      increments.push_back(truth.rruOffsetsS(t, i) - truth.rruOffsetsS(t - 1, i));
  double acc = 0.0;
  for (double d : increments) acc += d * d;
  CHECK(std::sqrt(acc / static_cast<double>(increments.size())) ==
        doctest::Approx(5e-9).epsilon(0.1));
}

TEST_CASE("input validation for rrus and the em model") {
  RruSet dup;
  dup.positions = {{1.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(dup.validate(), Error);

  EmModel bad;
  bad.toaNoiseSigmaS = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);

  RruSet two;
  two.positions = {{0.0, 0.0}, {1.0, 0.0}};
  const std::vector<double> one = {0.0};
  CHECK_THROWS_AS(solve_tdoa(one, two, 0, Vec2{0, -5}, Vec2{0, 0}), Error);
}

}  // TEST_SUITE
