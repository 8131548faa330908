#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "asense/common.hpp"

namespace asense {

// MIMO-OFDM measurement grid. Antenna arrays at both ends are uniform and
// linear, laid out along the y axis with broadside along +x.
struct OfdmGrid {
  int numSubcarriers = 64;          // N
  double subcarrierSpacingHz = 312.5e3;  // f0
  double blockPeriodS = 5e-3;       // Ts, one CSI measurement per block
  int numRxAntennas = 2;            // P
  int numTxAntennas = 1;            // Q
  double carrierFrequencyHz = 5.8e9;
  double rxElementSpacingM = 0.0;   // 0 -> half carrier wavelength
  double txElementSpacingM = 0.0;

  double wavelengthM() const { return kSpeedOfLight / carrierFrequencyHz; }
  double rxSpacing() const { return rxElementSpacingM > 0 ? rxElementSpacingM : 0.5 * wavelengthM(); }
  double txSpacing() const { return txElementSpacingM > 0 ? txElementSpacingM : 0.5 * wavelengthM(); }

  // Throws on hard violations, returns human-readable warnings for soft ones
  // (element spacing above half wavelength is allowed but aliases angles).
  std::vector<std::string> validate() const;
};

struct Path {
  double delayS = 0.0;
  double dopplerHz = 0.0;
  cplx amplitude = {1.0, 0.0};
  double aoaRad = 0.0;  // broadside convention, [-pi/2, pi/2]
  double aodRad = 0.0;
  bool isLos = false;
};

enum class PhaseMode { PerBlockUniform, Frozen };

// Per-block asynchronism state between the unlocked Tx and Rx clocks.
struct ClockState {
  double randomPhaseRad = 0.0;  // phi_t in [0, 2pi)
  double tmoS = 0.0;            // timing offset tau_o,t
  double cfoHz = 0.0;           // carrier frequency offset f_o,t
  double stabilityPpm = 20.0;
  PhaseMode phaseMode = PhaseMode::PerBlockUniform;
};

struct Reflector {
  Vec2 position;
  Vec2 velocity;
  cplx reflectivity = {1.0, 0.0};
};

struct Scenario {
  Vec2 txPosition;
  Vec2 rxPosition;
  std::vector<Reflector> reflectors;
  bool losBlocked = false;
  uint64_t seed = 0;
};

struct NoiseSpec {
  double snrDb = 20.0;   // against the noiseless tensor's mean power
  uint64_t seed = 0;
};

// Complex CSI samples H(n,t,p,q). Storage puts the block axis innermost so a
// per-(n,p,q) time series is contiguous.
struct CsiTensor {
  Eigen::VectorXcd data;
  OfdmGrid grid;
  int numBlocks = 0;

  int64_t index(int n, int t, int p, int q) const {
    const int64_t pq = static_cast<int64_t>(p) * grid.numTxAntennas + q;
    return (pq * grid.numSubcarriers + n) * numBlocks + t;
  }
  cplx& at(int n, int t, int p, int q) { return data[index(n, t, p, q)]; }
  const cplx& at(int n, int t, int p, int q) const { return data[index(n, t, p, q)]; }

  // N x T matrix of the (p,q) slice, rows = subcarriers.
  Eigen::MatrixXcd slice(int p, int q) const;
  // Contiguous map of the time series for one (n,p,q).
  Eigen::Map<const Eigen::VectorXcd> series(int n, int p, int q) const;

  double rms() const { return std::sqrt(data.squaredNorm() / static_cast<double>(data.size())); }
};

// Array phase u_{l,p,q} for element indices (p,q) of the ULA pair.
double steering_phase(const Path& path, int p, int q, const OfdmGrid& grid);

// One bounded-random-walk step of the TMO/CFO state over dt seconds.
// The per-step TMO bound is ppm*1e-6*dt; the CFO bound scales the same way
// against the carrier, with cfoWalkScale relative to a 1 s reference interval.
ClockState evolve_clock(const ClockState& state, double dtS, double carrierHz, Rng& rng,
                        double cfoWalkScale = 1.0);

// Initial state with tmo/cfo drawn inside the physical skew bounds
// (|cfo| <= ppm*1e-6*fc) and phase drawn when the mode asks for it.
ClockState draw_initial_clock(double stabilityPpm, PhaseMode mode, double carrierHz,
                              double tmoBoundS, Rng& rng);

std::vector<ClockState> make_clock_trace(const ClockState& initial, int numBlocks,
                                         const OfdmGrid& grid, Rng& rng,
                                         double cfoWalkScale = 1.0);

std::vector<Path> geometry_to_paths(const Scenario& scenario, const OfdmGrid& grid);

CsiTensor synthesize_csi(const std::vector<Path>& paths, const OfdmGrid& grid,
                         const std::vector<ClockState>& clockTrace, int numBlocks,
                         const std::optional<NoiseSpec>& noise = std::nullopt);

// Generalized synthesis where path l contributes phase thetaS[l][t] instead of
// the constant-Doppler ramp 2*pi*f_D*t*Ts. Used for swept-Doppler scenes; the
// constant-path overload forwards here.
CsiTensor synthesize_csi_phased(const std::vector<Path>& paths,
                                const std::vector<std::vector<double>>& pathPhaseRad,
                                const OfdmGrid& grid,
                                const std::vector<ClockState>& clockTrace, int numBlocks,
                                const std::optional<NoiseSpec>& noise = std::nullopt);

}  // namespace asense
