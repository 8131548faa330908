#pragma once

#include <Eigen/Dense>
#include <vector>

#include "asense/signal_model.hpp"

namespace asense::casr {

// CSI ratio series R(t) = H(n,t,p,q) / H(n,t,ref,q) for one (n,p,q).
struct RatioSeries {
  std::vector<cplx> values;
  int subcarrier = 0;
  int rxAntenna = 0;
  int refAntenna = 0;
  int txAntenna = 0;
};

struct CircleFit {
  cplx center;
  double radius = 0.0;
  double rmsResidual = 0.0;
};

struct BackgroundEstimate {
  // One static-component estimate per (n,p,q), indexed like CsiTensor with a
  // collapsed block axis.
  Eigen::VectorXcd values;
  bool valid = false;

  int64_t index(int n, int p, int q, const OfdmGrid& grid) const {
    return (static_cast<int64_t>(p) * grid.numTxAntennas + q) * grid.numSubcarriers + n;
  }
};

RatioSeries csi_ratio(const CsiTensor& csi, int refAntenna, int n, int p, int q);

// Algebraic (Kasa) least-squares circle through complex points.
CircleFit fit_circle(const std::vector<cplx>& points);

struct RotationEstimate {
  double dopplerHz = 0.0;
  int direction = 0;  // sign of the angular rate
};

// Unwrapped angle of (R - center) fitted against block time.
RotationEstimate arc_rotation_rate(const RatioSeries& series, const CircleFit& fit,
                                   double blockPeriodS);

// Temporal mean per (n,p,q), directly valid with frozen clocks; otherwise the
// per-block global phase of the antenna-summed CSI is removed first and the
// estimate is flagged accordingly.
BackgroundEstimate static_background(const CsiTensor& csi, bool clocksFrozen,
                                     bool preAlignPhase = true);

// Ratio against the static background, R_p(t) = H(n,t,p,q) / S(n,p,q). The
// ground-truth path supplies S per block including the clock factor, which
// keeps the identity R(combined) - 1 = sum_i (R(source_i) - 1) exact.
std::vector<RatioSeries> linearized_ratio(const CsiTensor& csi,
                                          const BackgroundEstimate& background);

// Ground-truth background: the noiseless static-only CSI under the same
// clock trace, as produced by the simulator.
std::vector<RatioSeries> linearized_ratio_truth(const CsiTensor& csi,
                                                const CsiTensor& staticOnlyCsi);

// Moving-average smoother used ahead of circle fitting on noisy series.
std::vector<cplx> smooth_series(const std::vector<cplx>& values, int window);

struct ArcSeries {
  RatioSeries series;  // smoothed values
  CircleFit fit;
};

// Fit every (subcarrier, antenna) ratio series and keep the one with the best
// residual-to-radius quality; static multipath makes some series trace much
// cleaner arcs than others.
ArcSeries best_arc_series(const CsiTensor& csi, int refAntenna, int smoothWindow);

}  // namespace asense::casr
