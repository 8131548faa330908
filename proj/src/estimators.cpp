#include "asense/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace asense {

Spectrum2D periodogram_2d(const Eigen::MatrixXcd& data, const OfdmGrid& grid, int zeroPad) {
  if (data.size() == 0) throw Error("periodogram_2d: empty data");
  if (zeroPad < 1) throw Error("periodogram_2d: zeroPad must be >= 1");
  const int N = static_cast<int>(data.rows());
  const int T = static_cast<int>(data.cols());
  const int M = N * zeroPad;
  const int K = T * zeroPad;
  const double f0 = grid.subcarrierSpacingHz;
  const double Ts = grid.blockPeriodS;

  Spectrum2D out;
  out.delayAxisS.resize(static_cast<size_t>(M));
  out.dopplerAxisHz.resize(static_cast<size_t>(K));
  const double delayStep = 1.0 / (f0 * M);
  const double dopStep = 1.0 / (Ts * K);
  for (int i = 0; i < M; ++i) out.delayAxisS[static_cast<size_t>(i)] = (i - M / 2) * delayStep;
  for (int j = 0; j < K; ++j) out.dopplerAxisHz[static_cast<size_t>(j)] = (j - K / 2) * dopStep;

  Eigen::MatrixXcd delaySteer(M, N);  // e^{+j 2pi tau n f0}
  for (int i = 0; i < M; ++i)
    for (int n = 0; n < N; ++n)
      delaySteer(i, n) = std::polar(1.0, kTwoPi * out.delayAxisS[static_cast<size_t>(i)] * n * f0);
  Eigen::MatrixXcd dopplerSteer(T, K);  // e^{-j 2pi f t Ts}
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < K; ++j)
      dopplerSteer(t, j) =
          std::polar(1.0, -kTwoPi * out.dopplerAxisHz[static_cast<size_t>(j)] * t * Ts);

  const Eigen::MatrixXcd correlated = (delaySteer * data) * dopplerSteer;
  out.values = correlated.array().abs2();
  return out;
}

namespace {

// Expand each column into sliding subvectors of the given length.
Eigen::MatrixXcd hankel_smooth(const Eigen::MatrixXcd& snapshots, int window) {
  const int dim = static_cast<int>(snapshots.rows());
  const int count = static_cast<int>(snapshots.cols());
  const int perColumn = dim - window + 1;
  Eigen::MatrixXcd out(window, static_cast<int64_t>(perColumn) * count);
  int64_t col = 0;
  for (int c = 0; c < count; ++c)
    for (int s = 0; s < perColumn; ++s) out.col(col++) = snapshots.col(c).segment(s, window);
  return out;
}

}  // namespace

MusicResult music_spectrum(const Eigen::MatrixXcd& snapshots,
                           const std::function<Eigen::VectorXcd(double)>& steering,
                           int modelOrder, int smoothingWindow,
                           const std::vector<double>& paramGrid) {
  if (snapshots.size() == 0) throw Error("music_spectrum: empty snapshots");
  const int dim = static_cast<int>(snapshots.rows());
  if (smoothingWindow < 1 || smoothingWindow > dim)
    throw Error("music_spectrum: smoothing window outside [1, snapshot dimension]");
  if (modelOrder < 1) throw Error("music_spectrum: model order must be >= 1");
  if (modelOrder >= smoothingWindow)
    throw Error("music_spectrum: model order must be below the smoothed dimension");

  const Eigen::MatrixXcd smoothed = hankel_smooth(snapshots, smoothingWindow);
  if (smoothed.cols() < modelOrder + 1)
    throw Error("music_spectrum: too few snapshots after smoothing");

  const Eigen::MatrixXcd cov =
      smoothed * smoothed.adjoint() / static_cast<double>(smoothed.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("music_spectrum: eigendecomposition failed");

  // Eigenvalues come out ascending; the signal space is the top modelOrder.
  const Eigen::MatrixXcd signalBasis =
      eig.eigenvectors().rightCols(modelOrder);
  const double evMax = eig.eigenvalues().maxCoeff();
  const double rankFloor = std::max(evMax, 1e-300) * 1e-12;
  int numericalRank = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()[i] > rankFloor) ++numericalRank;

  MusicResult result;
  result.paramGrid = paramGrid;
  result.eigenvalues = eig.eigenvalues();
  result.rankDeficient = numericalRank < modelOrder;
  result.pseudoSpectrum.resize(paramGrid.size());
  for (size_t i = 0; i < paramGrid.size(); ++i) {
    const Eigen::VectorXcd a = steering(paramGrid[i]);
    if (a.size() != smoothingWindow)
      throw Error("music_spectrum: steering vector length must equal the smoothing window");
    const double total = a.squaredNorm();
    const double inSignal = (signalBasis.adjoint() * a).squaredNorm();
    const double denom = std::max(total - inSignal, total * 1e-15);
    result.pseudoSpectrum[i] = 1.0 / denom;
  }
  return result;
}

Eigen::VectorXcd mirror_basis(const Eigen::VectorXcd& a) {
  return a + a.reverse().eval();
}

namespace {

struct RawPeak {
  int di = 0, fi = 0;
  double value = 0.0;
};

double parabolic_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) return 0.0;  // not a proper maximum
  double delta = 0.5 * (left - right) / denom;
  return std::clamp(delta, -0.5, 0.5);
}

}  // namespace

PeakSet peak_extract(const Spectrum2D& spectrum, int maxPeaks, double relThreshold) {
  if (relThreshold <= 0.0 || relThreshold > 1.0)
    throw Error("peak_extract: relThreshold must be in (0, 1]");
  const int M = static_cast<int>(spectrum.values.rows());
  const int K = static_cast<int>(spectrum.values.cols());
  const double globalMax = spectrum.values.maxCoeff();
  if (globalMax <= 0.0) return {};
  const double floor = relThreshold * globalMax;

  std::vector<RawPeak> raw;
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < K; ++j) {
      const double v = spectrum.values(i, j);
      if (v < floor) continue;
      bool strictMax = true;
      for (int di = -1; di <= 1 && strictMax; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || ni >= M || nj < 0 || nj >= K) continue;
          if (spectrum.values(ni, nj) >= v) {
            strictMax = false;
            break;
          }
        }
      }
      if (strictMax) raw.push_back({i, j, v});
    }
  }

  std::sort(raw.begin(), raw.end(), [](const RawPeak& a, const RawPeak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.di != b.di) return a.di < b.di;
    return a.fi < b.fi;
  });
  if (static_cast<int>(raw.size()) > maxPeaks) raw.resize(static_cast<size_t>(maxPeaks));

  PeakSet peaks;
  for (const RawPeak& r : raw) {
    Peak p;
    double dShift = 0.0, fShift = 0.0;
    if (r.di > 0 && r.di < M - 1)
      dShift = parabolic_offset(spectrum.values(r.di - 1, r.fi), r.value,
                                spectrum.values(r.di + 1, r.fi));
    if (r.fi > 0 && r.fi < K - 1)
      fShift = parabolic_offset(spectrum.values(r.di, r.fi - 1), r.value,
                                spectrum.values(r.di, r.fi + 1));
    p.delayS = spectrum.delayAxisS[static_cast<size_t>(r.di)] + dShift * spectrum.delayStep();
    p.dopplerHz =
        spectrum.dopplerAxisHz[static_cast<size_t>(r.fi)] + fShift * spectrum.dopplerStep();
    p.magnitude = r.value;
    peaks.push_back(p);
  }
  return peaks;
}

std::vector<std::pair<double, double>> peak_extract_1d(const std::vector<double>& axis,
                                                       const std::vector<double>& values,
                                                       int maxPeaks, double relThreshold) {
  if (axis.size() != values.size()) throw Error("peak_extract_1d: axis/value size mismatch");
  if (values.empty()) return {};
  const double globalMax = *std::max_element(values.begin(), values.end());
  if (globalMax <= 0.0) return {};
  const double floor = relThreshold * globalMax;
  const int K = static_cast<int>(values.size());

  std::vector<std::pair<int, double>> raw;
  for (int j = 0; j < K; ++j) {
    const double v = values[static_cast<size_t>(j)];
    if (v < floor) continue;
    const bool leftOk = j == 0 || values[static_cast<size_t>(j - 1)] < v;
    const bool rightOk = j == K - 1 || values[static_cast<size_t>(j + 1)] < v;
    if (leftOk && rightOk) raw.push_back({j, v});
  }
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(raw.size()) > maxPeaks) raw.resize(static_cast<size_t>(maxPeaks));

  std::vector<std::pair<double, double>> peaks;
  const double step = axis.size() > 1 ? axis[1] - axis[0] : 0.0;
  for (const auto& [j, v] : raw) {
    double shift = 0.0;
    if (j > 0 && j < K - 1)
      shift = parabolic_offset(values[static_cast<size_t>(j - 1)], v,
                               values[static_cast<size_t>(j + 1)]);
    peaks.push_back({axis[static_cast<size_t>(j)] + shift * step, v});
  }
  return peaks;
}

double rmse(const std::vector<double>& estimates, const std::vector<double>& truths) {
  if (estimates.size() != truths.size()) throw Error("rmse: length mismatch");
  if (estimates.empty()) throw Error("rmse: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - truths[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

}  // namespace asense
