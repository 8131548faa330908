#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "asense/estimators.hpp"
#include "asense/signal_model.hpp"

namespace asense::cacc {

// Cross-antenna products X(n,t,p,q) = H(n,t,p,q) * conj(H(n,t,ref,q)) for all
// p != ref; the per-block clock terms cancel in the product. Slices enumerate
// the surviving (p,q) pairs.
struct CaccTensor {
  Eigen::VectorXcd data;  // [(slice * N + n) * T + t]
  OfdmGrid grid;
  int numBlocks = 0;
  int refAntenna = 0;
  int firstBlock = 0;        // original block index of t = 0 (shifts after filtering)
  std::vector<int> rxAntennas;  // original p per rx slice group

  int numSlices() const { return static_cast<int>(rxAntennas.size()) * grid.numTxAntennas; }
  int sliceRx(int s) const { return rxAntennas[static_cast<size_t>(s / grid.numTxAntennas)]; }
  int sliceTx(int s) const { return s % grid.numTxAntennas; }

  int64_t index(int s, int n, int t) const {
    return (static_cast<int64_t>(s) * grid.numSubcarriers + n) * numBlocks + t;
  }
  cplx& at(int s, int n, int t) { return data[index(s, n, t)]; }
  const cplx& at(int s, int n, int t) const { return data[index(s, n, t)]; }

  Eigen::MatrixXcd slice(int s) const;
  Eigen::Map<const Eigen::VectorXcd> series(int s, int n) const {
    return {data.data() + index(s, n, 0), numBlocks};
  }
};

CaccTensor cross_correlate(const CsiTensor& csi, int refAntenna);

// Add-minus preconditioning: X = (H_p - beta) * conj(H_ref + alpha). Defaults
// tie both constants to the reference antenna RMS amplitude. The constants do
// not ride the clock factor, so image suppression requires stable clocks over
// the capture (frozen phase mode).
CaccTensor add_minus(const CsiTensor& csi, int refAntenna,
                     std::optional<cplx> alpha = std::nullopt,
                     std::optional<cplx> beta = std::nullopt, double c0 = 1.0);

// Linear-phase windowed-sinc (Hamming) bandpass over the block axis of every
// (slice, n) series; output is the valid region only, so the block count
// shrinks by taps-1 and firstBlock advances by the group delay.
CaccTensor static_filter(const CaccTensor& x, double passbandLowHz, double passbandHighHz,
                         int taps);

// Tap vector of the filter above, for response checks.
std::vector<double> design_bandpass(double lowHz, double highHz, int taps, double blockPeriodS);

Spectrum2D relative_spectrum(const CaccTensor& x, int sliceIndex = 0, int zeroPad = 4);

struct MirroredMusicOptions {
  int windowN = 0;        // 0 -> auto
  int windowT = 0;
  int maxSnapshots = 4096;
  // a candidate source must carry at least this multiple of the median
  // eigenvalue, otherwise it is treated as noise and dropped
  double sourceGate = 100.0;
};

// 2-D subspace search where data sub-snapshots and steering vectors are both
// mirrored (v + reverse(v)), collapsing each +/- image pair onto a single
// basis vector. Returns signed (relative delay, relative Doppler) peaks; the
// sign of each pair is chosen by correlating both candidates against the
// unmirrored tensor.
PeakSet mirrored_music(const CaccTensor& x, int modelOrder,
                       const std::vector<double>& delayGridS,
                       const std::vector<double>& dopplerGridHz,
                       const MirroredMusicOptions& options = {});

// Ratio snapshots of the Doppler estimator built on the dominating LOS cross
// product: columns are per-(n,q) series of mean_p conj((X - mean_t X)/mean_t X),
// in which the true-Doppler component adds coherently across antennas.
Eigen::MatrixXcd dfs_ratio_snapshots(const CsiTensor& csi, int refAntenna);

// Doppler-only estimation from the ratio snapshots via MUSIC.
PeakSet dfs_doppler(const CsiTensor& csi, int refAntenna, int modelOrder,
                    const std::vector<double>& dopplerGridHz, int smoothingWindow = 0);

}  // namespace asense::cacc
