#pragma once

#include <optional>

#include "asense/signal_model.hpp"

namespace asense::testing {

inline OfdmGrid small_grid(int n = 32, int p = 2, int q = 1) {
  OfdmGrid g;
  g.numSubcarriers = n;
  g.numRxAntennas = p;
  g.numTxAntennas = q;
  g.subcarrierSpacingHz = 312.5e3;
  g.blockPeriodS = 5e-3;
  g.carrierFrequencyHz = 5.8e9;
  return g;
}

inline std::vector<ClockState> zero_trace(int numBlocks) {
  ClockState s;
  s.stabilityPpm = 0.0;
  s.phaseMode = PhaseMode::Frozen;
  return std::vector<ClockState>(static_cast<size_t>(numBlocks), s);
}

inline std::vector<ClockState> random_trace(const OfdmGrid& grid, int numBlocks, uint64_t seed,
                                            double ppm = 20.0) {
  Rng rng(seed);
  const ClockState initial =
      draw_initial_clock(ppm, PhaseMode::PerBlockUniform, grid.carrierFrequencyHz, 1e-6, rng);
  return make_clock_trace(initial, numBlocks, grid, rng);
}

struct TwoPathScene {
  OfdmGrid grid;
  std::vector<Path> paths;  // paths[0] = LOS, paths[1] = dynamic
  double relDelayS = 0.0;
  double dopplerHz = 0.0;
};

// LOS-dominant scene with one dynamic path; relative delay and Doppler land on
// the unpadded periodogram bins of (grid, numBlocks) when onGrid is true.
inline TwoPathScene los_dynamic_scene(double losDb, double dopplerHz, double relDelayS,
                                      uint64_t seed, int n = 32, int p = 2) {
  TwoPathScene scene;
  scene.grid = small_grid(n, p);
  scene.relDelayS = relDelayS;
  scene.dopplerHz = dopplerHz;

  Path los;
  los.isLos = true;
  los.delayS = 2e-9;
  los.amplitude = {1.0, 0.0};

  Path dyn;
  dyn.delayS = los.delayS + relDelayS;
  dyn.dopplerHz = dopplerHz;
  Rng rng(seed);
  dyn.amplitude = std::polar(std::pow(10.0, -losDb / 20.0), uniform(rng, 0.0, kTwoPi));
  dyn.aoaRad = 0.6;

  scene.paths = {los, dyn};
  return scene;
}

}  // namespace asense::testing
