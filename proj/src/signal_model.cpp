#include "asense/signal_model.hpp"

#include <cmath>

namespace asense {

std::vector<std::string> OfdmGrid::validate() const {
  if (numSubcarriers < 1) throw Error("grid: numSubcarriers must be >= 1");
  if (numRxAntennas < 1) throw Error("grid: numRxAntennas must be >= 1");
  if (numTxAntennas < 1) throw Error("grid: numTxAntennas must be >= 1");
  if (subcarrierSpacingHz <= 0) throw Error("grid: subcarrierSpacingHz must be > 0");
  if (blockPeriodS <= 0) throw Error("grid: blockPeriodS must be > 0");
  if (carrierFrequencyHz <= 0) throw Error("grid: carrierFrequencyHz must be > 0");
  std::vector<std::string> warnings;
  const double half = 0.5 * wavelengthM();
  if (rxSpacing() > half * (1.0 + 1e-12))
    warnings.push_back("rx element spacing exceeds half the carrier wavelength; angles alias");
  if (txSpacing() > half * (1.0 + 1e-12))
    warnings.push_back("tx element spacing exceeds half the carrier wavelength; angles alias");
  return warnings;
}

Eigen::MatrixXcd CsiTensor::slice(int p, int q) const {
  const int N = grid.numSubcarriers;
  Eigen::MatrixXcd out(N, numBlocks);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < numBlocks; ++t) out(n, t) = at(n, t, p, q);
  return out;
}

Eigen::Map<const Eigen::VectorXcd> CsiTensor::series(int n, int p, int q) const {
  return {data.data() + index(n, 0, p, q), numBlocks};
}

double steering_phase(const Path& path, int p, int q, const OfdmGrid& grid) {
  if (p < 0 || p >= grid.numRxAntennas || q < 0 || q >= grid.numTxAntennas)
    throw Error("steering_phase: antenna index outside grid");
  const double lambda = grid.wavelengthM();
  return kTwoPi * (grid.rxSpacing() / lambda) * p * std::sin(path.aoaRad) +
         kTwoPi * (grid.txSpacing() / lambda) * q * std::sin(path.aodRad);
}

ClockState evolve_clock(const ClockState& state, double dtS, double carrierHz, Rng& rng,
                        double cfoWalkScale) {
  if (dtS <= 0) throw Error("evolve_clock: dt must be > 0");
  ClockState next = state;
  const double scale = state.stabilityPpm * 1e-6;
  const double tmoBound = scale * dtS;
  if (tmoBound > 0) next.tmoS += uniform(rng, -tmoBound, tmoBound);
  const double cfoBound = scale * carrierHz * cfoWalkScale * dtS;  // refInterval = 1 s
  if (cfoBound > 0) next.cfoHz += uniform(rng, -cfoBound, cfoBound);
  if (state.phaseMode == PhaseMode::PerBlockUniform)
    next.randomPhaseRad = uniform(rng, 0.0, kTwoPi);
  return next;
}

ClockState draw_initial_clock(double stabilityPpm, PhaseMode mode, double carrierHz,
                              double tmoBoundS, Rng& rng) {
  ClockState s;
  s.stabilityPpm = stabilityPpm;
  s.phaseMode = mode;
  const double cfoBound = stabilityPpm * 1e-6 * carrierHz;
  s.tmoS = tmoBoundS > 0 ? uniform(rng, -tmoBoundS, tmoBoundS) : 0.0;
  s.cfoHz = cfoBound > 0 ? uniform(rng, -cfoBound, cfoBound) : 0.0;
  s.randomPhaseRad = mode == PhaseMode::PerBlockUniform ? uniform(rng, 0.0, kTwoPi) : 0.0;
  return s;
}

std::vector<ClockState> make_clock_trace(const ClockState& initial, int numBlocks,
                                         const OfdmGrid& grid, Rng& rng, double cfoWalkScale) {
  std::vector<ClockState> trace;
  trace.reserve(static_cast<size_t>(numBlocks));
  trace.push_back(initial);
  for (int t = 1; t < numBlocks; ++t)
    trace.push_back(evolve_clock(trace.back(), grid.blockPeriodS, grid.carrierFrequencyHz, rng,
                                 cfoWalkScale));
  return trace;
}

namespace {

double aoa_from_direction(const Vec2& unit) {
  const double s = std::clamp(unit.y, -1.0, 1.0);
  return std::asin(s);
}

}  // namespace

std::vector<Path> geometry_to_paths(const Scenario& scenario, const OfdmGrid& grid) {
  const Vec2 tx = scenario.txPosition;
  const Vec2 rx = scenario.rxPosition;
  const double dLos = distance(tx, rx);
  if (dLos <= 0) throw Error("geometry_to_paths: tx and rx positions coincide");
  const double lambda = grid.wavelengthM();

  std::vector<Path> paths;
  if (!scenario.losBlocked) {
    Path los;
    los.isLos = true;
    los.delayS = dLos / kSpeedOfLight;
    los.dopplerHz = 0.0;  // static endpoints
    los.amplitude = cplx(1.0 / dLos, 0.0);
    const Vec2 uRx = (tx - rx) * (1.0 / dLos);  // rx toward tx
    const Vec2 uTx = (rx - tx) * (1.0 / dLos);
    los.aoaRad = aoa_from_direction(uRx);
    los.aodRad = aoa_from_direction(uTx);
    paths.push_back(los);
  }
  for (const Reflector& r : scenario.reflectors) {
    const double dTx = distance(tx, r.position);
    const double dRx = distance(rx, r.position);
    if (dTx <= 0 || dRx <= 0)
      throw Error("geometry_to_paths: reflector coincides with tx or rx");
    Path path;
    path.delayS = (dTx + dRx) / kSpeedOfLight;
    // d/dt of the bistatic path length from the reflector velocity.
    const Vec2 uFromTx = (r.position - tx) * (1.0 / dTx);
    const Vec2 uFromRx = (r.position - rx) * (1.0 / dRx);
    const double rate = uFromTx.dot(r.velocity) + uFromRx.dot(r.velocity);
    path.dopplerHz = -rate / lambda;
    path.amplitude = r.reflectivity / (dTx * dRx);
    path.aoaRad = aoa_from_direction((r.position - rx) * (1.0 / dRx));
    path.aodRad = aoa_from_direction(uFromTx);
    paths.push_back(path);
  }
  return paths;
}

CsiTensor synthesize_csi(const std::vector<Path>& paths, const OfdmGrid& grid,
                         const std::vector<ClockState>& clockTrace, int numBlocks,
                         const std::optional<NoiseSpec>& noise) {
  std::vector<std::vector<double>> phases(paths.size());
  for (size_t l = 0; l < paths.size(); ++l) {
    phases[l].resize(static_cast<size_t>(numBlocks));
    for (int t = 0; t < numBlocks; ++t)
      phases[l][static_cast<size_t>(t)] = kTwoPi * paths[l].dopplerHz * t * grid.blockPeriodS;
  }
  return synthesize_csi_phased(paths, phases, grid, clockTrace, numBlocks, noise);
}

CsiTensor synthesize_csi_phased(const std::vector<Path>& paths,
                                const std::vector<std::vector<double>>& pathPhaseRad,
                                const OfdmGrid& grid,
                                const std::vector<ClockState>& clockTrace, int numBlocks,
                                const std::optional<NoiseSpec>& noise) {
  if (paths.empty()) throw Error("synthesize_csi: empty path list");
  if (static_cast<int>(clockTrace.size()) != numBlocks)
    throw Error("synthesize_csi: clock trace length must equal the block count");
  if (pathPhaseRad.size() != paths.size())
    throw Error("synthesize_csi: one phase series required per path");
  grid.validate();

  const int N = grid.numSubcarriers;
  const int P = grid.numRxAntennas;
  const int Q = grid.numTxAntennas;
  const int T = numBlocks;
  const size_t L = paths.size();

  CsiTensor out;
  out.grid = grid;
  out.numBlocks = T;
  out.data = Eigen::VectorXcd::Zero(static_cast<int64_t>(N) * T * P * Q);

  // Per-path factors of Eq-style phase model, clock terms kept separable.
  Eigen::MatrixXcd delayFactor(static_cast<int>(L), N);   // e^{-j2pi tau_l n f0}
  Eigen::MatrixXcd blockFactor(static_cast<int>(L), T);   // b_l e^{j theta_l(t)}
  for (size_t l = 0; l < L; ++l) {
    for (int n = 0; n < N; ++n)
      delayFactor(static_cast<int>(l), n) =
          std::polar(1.0, -kTwoPi * paths[l].delayS * n * grid.subcarrierSpacingHz);
    for (int t = 0; t < T; ++t)
      blockFactor(static_cast<int>(l), t) =
          paths[l].amplitude * std::polar(1.0, pathPhaseRad[l][static_cast<size_t>(t)]);
  }

  // Clock factor g(n,t) = e^{j(phi_t - 2pi tau_o n f0 + 2pi f_o t Ts)}.
  Eigen::MatrixXcd clockFactor(N, T);
  for (int t = 0; t < T; ++t) {
    const ClockState& ck = clockTrace[static_cast<size_t>(t)];
    const double common = ck.randomPhaseRad + kTwoPi * ck.cfoHz * t * grid.blockPeriodS;
    for (int n = 0; n < N; ++n)
      clockFactor(n, t) =
          std::polar(1.0, common - kTwoPi * ck.tmoS * n * grid.subcarrierSpacingHz);
  }

  for (int p = 0; p < P; ++p) {
    for (int q = 0; q < Q; ++q) {
      Eigen::VectorXcd steer(static_cast<int>(L));
      for (size_t l = 0; l < L; ++l)
        steer(static_cast<int>(l)) = std::polar(1.0, steering_phase(paths[l], p, q, grid));
      for (int n = 0; n < N; ++n) {
        cplx* dst = out.data.data() + out.index(n, 0, p, q);
        for (int t = 0; t < T; ++t) {
          cplx sum = 0.0;
          for (size_t l = 0; l < L; ++l)
            sum += steer(static_cast<int>(l)) * delayFactor(static_cast<int>(l), n) *
                   blockFactor(static_cast<int>(l), t);
          dst[t] = clockFactor(n, t) * sum;
        }
      }
    }
  }

  if (noise) {
    const double meanPower = out.data.squaredNorm() / static_cast<double>(out.data.size());
    const double sigma = std::sqrt(meanPower * std::pow(10.0, -noise->snrDb / 10.0) / 2.0);
    Rng rng(noise->seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (int64_t i = 0; i < out.data.size(); ++i) out.data[i] += cplx(dist(rng), dist(rng));
  }

  if (!out.data.allFinite()) throw Error("synthesize_csi: non-finite tensor entries");
  return out;
}

}  // namespace asense
