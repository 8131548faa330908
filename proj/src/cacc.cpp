#include "asense/cacc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asense::cacc {

Eigen::MatrixXcd CaccTensor::slice(int s) const {
  const int N = grid.numSubcarriers;
  Eigen::MatrixXcd out(N, numBlocks);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < numBlocks; ++t) out(n, t) = at(s, n, t);
  return out;
}

namespace {

CaccTensor make_skeleton(const CsiTensor& csi, int refAntenna) {
  const int P = csi.grid.numRxAntennas;
  if (P < 2) throw Error("cacc: at least two receive antennas required");
  if (refAntenna < 0 || refAntenna >= P) throw Error("cacc: reference antenna out of range");
  CaccTensor x;
  x.grid = csi.grid;
  x.numBlocks = csi.numBlocks;
  x.refAntenna = refAntenna;
  for (int p = 0; p < P; ++p)
    if (p != refAntenna) x.rxAntennas.push_back(p);
  x.data.resize(static_cast<int64_t>(x.numSlices()) * csi.grid.numSubcarriers * csi.numBlocks);
  return x;
}

}  // namespace

CaccTensor cross_correlate(const CsiTensor& csi, int refAntenna) {
  CaccTensor x = make_skeleton(csi, refAntenna);
  const int N = csi.grid.numSubcarriers;
  const int T = csi.numBlocks;
  for (int s = 0; s < x.numSlices(); ++s) {
    const int p = x.sliceRx(s);
    const int q = x.sliceTx(s);
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t)
        x.at(s, n, t) = csi.at(n, t, p, q) * std::conj(csi.at(n, t, refAntenna, q));
  }
  return x;
}

CaccTensor add_minus(const CsiTensor& csi, int refAntenna, std::optional<cplx> alpha,
                     std::optional<cplx> beta, double c0) {
  CaccTensor x = make_skeleton(csi, refAntenna);
  const int N = csi.grid.numSubcarriers;
  const int T = csi.numBlocks;

  if (!alpha || !beta) {
    double power = 0.0;
    for (int q = 0; q < csi.grid.numTxAntennas; ++q)
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) power += std::norm(csi.at(n, t, refAntenna, q));
    power /= static_cast<double>(N) * T * csi.grid.numTxAntennas;
    const cplx c(c0 * std::sqrt(power), 0.0);
    if (!alpha) alpha = c;
    if (!beta) beta = c;
  }

  for (int s = 0; s < x.numSlices(); ++s) {
    const int p = x.sliceRx(s);
    const int q = x.sliceTx(s);
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t)
        x.at(s, n, t) =
            (csi.at(n, t, p, q) - *beta) * std::conj(csi.at(n, t, refAntenna, q) + *alpha);
  }
  return x;
}

std::vector<double> design_bandpass(double lowHz, double highHz, int taps, double blockPeriodS) {
  const double nyquist = 0.5 / blockPeriodS;
  if (lowHz < 0 || lowHz >= highHz || highHz > nyquist)
    throw Error("static_filter: passband must satisfy 0 <= low < high <= 1/(2 Ts)");
  if (taps < 3 || taps % 2 == 0) throw Error("static_filter: taps must be odd and >= 3");

  const double fs = 1.0 / blockPeriodS;
  const double fl = lowHz / fs, fh = highHz / fs;
  const int half = (taps - 1) / 2;
  auto sinc = [](double v) { return v == 0.0 ? 1.0 : std::sin(kPi * v) / (kPi * v); };

  std::vector<double> h(static_cast<size_t>(taps));
  for (int k = 0; k < taps; ++k) {
    const int m = k - half;
    const double ideal = 2.0 * fh * sinc(2.0 * fh * m) - 2.0 * fl * sinc(2.0 * fl * m);
    const double window = 0.54 - 0.46 * std::cos(kTwoPi * k / (taps - 1));
    h[static_cast<size_t>(k)] = ideal * window;
  }
  return h;
}

CaccTensor static_filter(const CaccTensor& x, double passbandLowHz, double passbandHighHz,
                         int taps) {
  if (x.numBlocks < taps) throw Error("static_filter: series shorter than the filter");
  const std::vector<double> h =
      design_bandpass(passbandLowHz, passbandHighHz, taps, x.grid.blockPeriodS);

  CaccTensor out = x;
  out.numBlocks = x.numBlocks - taps + 1;
  out.firstBlock = x.firstBlock + (taps - 1) / 2;
  out.data.resize(static_cast<int64_t>(x.numSlices()) * x.grid.numSubcarriers * out.numBlocks);
  for (int s = 0; s < x.numSlices(); ++s) {
    for (int n = 0; n < x.grid.numSubcarriers; ++n) {
      const cplx* src = x.data.data() + x.index(s, n, 0);
      cplx* dst = out.data.data() + out.index(s, n, 0);
      for (int t = 0; t < out.numBlocks; ++t) {
        cplx acc = 0.0;
        for (int k = 0; k < taps; ++k) acc += h[static_cast<size_t>(k)] * src[t + k];
        dst[t] = acc;
      }
    }
  }
  return out;
}

Spectrum2D relative_spectrum(const CaccTensor& x, int sliceIndex, int zeroPad) {
  if (sliceIndex < 0 || sliceIndex >= x.numSlices())
    throw Error("relative_spectrum: slice index out of range");
  return periodogram_2d(x.slice(sliceIndex), x.grid, zeroPad);
}

namespace {

// e^{-j 2pi tau n f0} over n.
Eigen::VectorXcd delay_vector(double tauS, int len, double f0) {
  Eigen::VectorXcd v(len);
  for (int n = 0; n < len; ++n) v(n) = std::polar(1.0, -kTwoPi * tauS * n * f0);
  return v;
}

// e^{+j 2pi f t Ts} over t.
Eigen::VectorXcd doppler_vector(double fHz, int len, double Ts) {
  Eigen::VectorXcd v(len);
  for (int t = 0; t < len; ++t) v(t) = std::polar(1.0, kTwoPi * fHz * t * Ts);
  return v;
}

double slice_correlation(const CaccTensor& x, double tauS, double fHz) {
  const int N = x.grid.numSubcarriers;
  const int T = x.numBlocks;
  const Eigen::VectorXcd dv = delay_vector(tauS, N, x.grid.subcarrierSpacingHz);
  const Eigen::VectorXcd fv = doppler_vector(fHz, T, x.grid.blockPeriodS);
  double total = 0.0;
  for (int s = 0; s < x.numSlices(); ++s) {
    cplx acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const cplx col = std::conj(dv(n));
      cplx inner = 0.0;
      const cplx* src = x.data.data() + x.index(s, n, 0);
      for (int t = 0; t < T; ++t) inner += std::conj(fv(t)) * src[t];
      acc += col * inner;
    }
    total += std::abs(acc);
  }
  return total;
}

}  // namespace

PeakSet mirrored_music(const CaccTensor& x, int modelOrder,
                       const std::vector<double>& delayGridS,
                       const std::vector<double>& dopplerGridHz,
                       const MirroredMusicOptions& options) {
  if (modelOrder < 1) throw Error("mirrored_music: model order must be >= 1");
  const int N = x.grid.numSubcarriers;
  const int T = x.numBlocks;
  int Wn = options.windowN > 0 ? options.windowN : std::clamp(N / 4, std::min(4, N), 12);
  int Wt = options.windowT > 0 ? options.windowT : std::clamp(T / 6, std::min(8, T), 24);
  Wn = std::min(Wn, N);
  Wt = std::min(Wt, T);
  const int dim = Wn * Wt;
  if (dim <= modelOrder) throw Error("mirrored_music: smoothing window too small for order");

  const int perSliceN = N - Wn + 1;
  const int perSliceT = T - Wt + 1;
  const int64_t totalAvailable =
      static_cast<int64_t>(x.numSlices()) * perSliceN * perSliceT;
  if (totalAvailable < modelOrder + 1)
    throw Error("mirrored_music: insufficient snapshots after smoothing");
  const int64_t stride =
      std::max<int64_t>(1, totalAvailable / std::max(1, options.maxSnapshots));

  // Accumulate the covariance of mirrored sub-blocks.
  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::VectorXcd snap(dim);
  int64_t used = 0, cursor = 0;
  for (int s = 0; s < x.numSlices(); ++s) {
    for (int n0 = 0; n0 < perSliceN; ++n0) {
      for (int t0 = 0; t0 < perSliceT; ++t0, ++cursor) {
        if (cursor % stride != 0) continue;
        for (int t = 0; t < Wt; ++t)
          for (int n = 0; n < Wn; ++n) snap(n + t * Wn) = x.at(s, n0 + n, t0 + t);
        const Eigen::VectorXcd m = snap + snap.reverse().eval();
        cov.noalias() += m * m.adjoint();
        ++used;
      }
    }
  }
  cov /= static_cast<double>(std::max<int64_t>(1, used));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("mirrored_music: eigendecomposition failed");
  const Eigen::MatrixXcd signalBasis = eig.eigenvectors().rightCols(modelOrder);

  // how many leading eigenvalues clear the noise gate
  const double medianEig = std::max(eig.eigenvalues()(dim / 2), 0.0);
  int confidentSources = 0;
  for (int k = 0; k < modelOrder; ++k)
    if (eig.eigenvalues()(dim - 1 - k) > options.sourceGate * medianEig) ++confidentSources;
  if (confidentSources == 0) return {};

  // Separable evaluation of |e_k^H m(tau, f)| over the grid: two small GEMMs
  // per eigenvector instead of a per-point projection.
  const int Mt = static_cast<int>(delayGridS.size());
  const int Mf = static_cast<int>(dopplerGridHz.size());
  const double f0 = x.grid.subcarrierSpacingHz;
  const double Ts = x.grid.blockPeriodS;
  Eigen::MatrixXcd Dm(Mt, Wn);
  for (int i = 0; i < Mt; ++i)
    Dm.row(i) = delay_vector(delayGridS[static_cast<size_t>(i)], Wn, f0).transpose();
  Eigen::MatrixXcd Fm(Wt, Mf);
  for (int j = 0; j < Mf; ++j)
    Fm.col(j) = doppler_vector(dopplerGridHz[static_cast<size_t>(j)], Wt, Ts);

  Eigen::ArrayXXd inSignal = Eigen::ArrayXXd::Zero(Mt, Mf);
  for (int k = 0; k < modelOrder; ++k) {
    Eigen::MatrixXcd Ek(Wn, Wt);
    for (int t = 0; t < Wt; ++t)
      for (int n = 0; n < Wn; ++n) Ek(n, t) = signalBasis(n + t * Wn, k);
    const Eigen::MatrixXcd direct = Dm * Ek.conjugate() * Fm;
    const Eigen::MatrixXcd flipped =
        Dm * Ek.conjugate().reverse().matrix() * Fm;  // index-reversed copy
    inSignal += (direct + flipped).array().abs2();
  }

  // ||m||^2 = 2 Wn Wt + 2 Re(<a, rev(a)>), separable across the two axes.
  Eigen::VectorXcd dsum(Mt), fsum(Mf);
  for (int i = 0; i < Mt; ++i) {
    const Eigen::VectorXcd v = delay_vector(delayGridS[static_cast<size_t>(i)], Wn, f0);
    cplx acc = 0.0;
    for (int n = 0; n < Wn; ++n) acc += std::conj(v(n)) * v(Wn - 1 - n);
    dsum(i) = acc;
  }
  for (int j = 0; j < Mf; ++j) {
    const Eigen::VectorXcd v = doppler_vector(dopplerGridHz[static_cast<size_t>(j)], Wt, Ts);
    cplx acc = 0.0;
    for (int t = 0; t < Wt; ++t) acc += std::conj(v(t)) * v(Wt - 1 - t);
    fsum(j) = acc;
  }

  Spectrum2D pseudo;
  pseudo.delayAxisS = delayGridS;
  pseudo.dopplerAxisHz = dopplerGridHz;
  pseudo.values.resize(Mt, Mf);
  for (int i = 0; i < Mt; ++i) {
    for (int j = 0; j < Mf; ++j) {
      const double normSq = 2.0 * dim + 2.0 * (dsum(i) * fsum(j)).real();
      const double denom = std::max(normSq - inSignal(i, j), std::abs(normSq) * 1e-15);
      pseudo.values(i, j) = 1.0 / denom;
    }
  }

  // The mirrored pseudo-spectrum is symmetric through the origin, so find
  // the strongest pair representatives and sign each via the unmirrored data.
  PeakSet found = peak_extract(pseudo, 4 * modelOrder + 8, 1e-6);
  const double dCell = delayGridS.size() > 1 ? delayGridS[1] - delayGridS[0] : 1.0;
  const double fCell = dopplerGridHz.size() > 1 ? dopplerGridHz[1] - dopplerGridHz[0] : 1.0;
  PeakSet kept;
  for (const Peak& p : found) {
    Peak canon = p;
    if (canon.dopplerHz < -0.5 * fCell ||
        (std::abs(canon.dopplerHz) <= 0.5 * fCell && canon.delayS < 0)) {
      canon.dopplerHz = -canon.dopplerHz;
      canon.delayS = -canon.delayS;
    }
    bool duplicate = false;
    for (const Peak& k : kept)
      if (std::abs(k.delayS - canon.delayS) <= dCell &&
          std::abs(k.dopplerHz - canon.dopplerHz) <= fCell)
        duplicate = true;
    if (!duplicate) kept.push_back(canon);
    if (static_cast<int>(kept.size()) == confidentSources) break;
  }

  for (Peak& p : kept) {
    const double plus = slice_correlation(x, p.delayS, p.dopplerHz);
    const double minus = slice_correlation(x, -p.delayS, -p.dopplerHz);
    if (minus > plus) {
      p.delayS = -p.delayS;
      p.dopplerHz = -p.dopplerHz;
    }
  }
  std::sort(kept.begin(), kept.end(),
            [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
  return kept;
}

Eigen::MatrixXcd dfs_ratio_snapshots(const CsiTensor& csi, int refAntenna) {
  const CaccTensor x = cross_correlate(csi, refAntenna);
  const int N = x.grid.numSubcarriers;
  const int Q = x.grid.numTxAntennas;
  const int T = x.numBlocks;
  const int numRx = static_cast<int>(x.rxAntennas.size());

  const double floor = std::max(
      1e-9 * std::sqrt(x.data.squaredNorm() / static_cast<double>(x.data.size())),
      std::numeric_limits<double>::min());

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(T, static_cast<int64_t>(N) * Q);
  for (int q = 0; q < Q; ++q) {
    for (int n = 0; n < N; ++n) {
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(T);
      for (int pi = 0; pi < numRx; ++pi) {
        const int s = pi * Q + q;
        const auto series = x.series(s, n);
        const cplx staticPart = series.mean();
        if (std::abs(staticPart) < floor)
          throw Error("dfs_doppler: static cross product below floor; no dominating LOS");
        // conj() makes the true-Doppler term antenna-coherent.
        acc += ((series.array() - staticPart) / staticPart).conjugate().matrix();
      }
      out.col(static_cast<int64_t>(q) * N + n) = acc / static_cast<double>(numRx);
    }
  }
  return out;
}

PeakSet dfs_doppler(const CsiTensor& csi, int refAntenna, int modelOrder,
                    const std::vector<double>& dopplerGridHz, int smoothingWindow) {
  const Eigen::MatrixXcd snapshots = dfs_ratio_snapshots(csi, refAntenna);
  const int T = static_cast<int>(snapshots.rows());
  const int W = smoothingWindow > 0 ? smoothingWindow : std::clamp(T / 2, std::min(4, T), 48);
  const double Ts = csi.grid.blockPeriodS;
  const MusicResult music = music_spectrum(
      snapshots, [&](double f) { return doppler_vector(f, W, Ts); }, modelOrder, W,
      dopplerGridHz);

  // gate out inputs whose covariance looks like white ratio noise (static
  // channel); a real Doppler source concentrates far above the median
  const int dim = static_cast<int>(music.eigenvalues.size());
  const double medianEig = std::max(music.eigenvalues(dim / 2), 0.0);
  int confident = 0;
  for (int k = 0; k < modelOrder; ++k)
    if (music.eigenvalues(dim - 1 - k) > 10.0 * medianEig) ++confident;
  if (confident == 0) return {};

  PeakSet peaks;
  for (const auto& [f, v] :
       peak_extract_1d(music.paramGrid, music.pseudoSpectrum, confident, 1e-6))
    peaks.push_back({0.0, f, v});
  return peaks;
}

}  // namespace asense::cacc
