#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "asense/common.hpp"
#include "asense/signal_model.hpp"

namespace asense {

// Non-negative power values over a (delay, Doppler) search grid.
struct Spectrum2D {
  std::vector<double> delayAxisS;
  std::vector<double> dopplerAxisHz;
  Eigen::ArrayXXd values;  // rows = delay, cols = Doppler

  double delayStep() const { return delayAxisS.size() > 1 ? delayAxisS[1] - delayAxisS[0] : 0.0; }
  double dopplerStep() const {
    return dopplerAxisHz.size() > 1 ? dopplerAxisHz[1] - dopplerAxisHz[0] : 0.0;
  }
};

struct Peak {
  double delayS = 0.0;
  double dopplerHz = 0.0;
  double magnitude = 0.0;
};

using PeakSet = std::vector<Peak>;  // descending magnitude

// Matched-filter evaluation of the CSI phase model over a symmetric
// delay-Doppler grid; zeroPad stretches both axes by that factor.
Spectrum2D periodogram_2d(const Eigen::MatrixXcd& data, const OfdmGrid& grid, int zeroPad = 4);

struct MusicResult {
  std::vector<double> paramGrid;
  std::vector<double> pseudoSpectrum;
  Eigen::VectorXd eigenvalues;  // ascending, from the smoothed sample covariance
  bool rankDeficient = false;   // sample covariance rank below the model order
};

// Subspace pseudo-spectrum over a scalar parameter grid. Snapshot columns are
// first expanded into Hankel subvectors of length smoothingWindow (coherent
// CSI snapshots need this to de-cohere the sources); steering(param) must
// produce vectors of that smoothed length.
MusicResult music_spectrum(const Eigen::MatrixXcd& snapshots,
                           const std::function<Eigen::VectorXcd(double)>& steering,
                           int modelOrder, int smoothingWindow,
                           const std::vector<double>& paramGrid);

// a + reverse(a) over the vectorized sample order.
Eigen::VectorXcd mirror_basis(const Eigen::VectorXcd& a);

PeakSet peak_extract(const Spectrum2D& spectrum, int maxPeaks, double relThreshold);

// 1-D variant for Doppler-only spectra.
std::vector<std::pair<double, double>> peak_extract_1d(const std::vector<double>& axis,
                                                       const std::vector<double>& values,
                                                       int maxPeaks, double relThreshold);

double rmse(const std::vector<double>& estimates, const std::vector<double>& truths);

}  // namespace asense
