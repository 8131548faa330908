#include "asense/casr.hpp"

#include <cmath>
#include <limits>

namespace asense::casr {

RatioSeries csi_ratio(const CsiTensor& csi, int refAntenna, int n, int p, int q) {
  const int P = csi.grid.numRxAntennas;
  if (P < 2) throw Error("csi_ratio: at least two receive antennas required");
  if (refAntenna < 0 || refAntenna >= P || p < 0 || p >= P)
    throw Error("csi_ratio: antenna index out of range");
  if (p == refAntenna) throw Error("csi_ratio: p must differ from the reference antenna");

  const double floor = 1e-12 * csi.rms();
  RatioSeries out;
  out.subcarrier = n;
  out.rxAntenna = p;
  out.refAntenna = refAntenna;
  out.txAntenna = q;
  out.values.resize(static_cast<size_t>(csi.numBlocks));
  for (int t = 0; t < csi.numBlocks; ++t) {
    const cplx denom = csi.at(n, t, refAntenna, q);
    if (std::abs(denom) < floor)
      throw Error("csi_ratio: reference antenna magnitude below the denominator floor");
    out.values[static_cast<size_t>(t)] = csi.at(n, t, p, q) / denom;
  }
  return out;
}

CircleFit fit_circle(const std::vector<cplx>& points) {
  if (points.size() < 3) throw Error("fit_circle: need at least three points");

  // Kasa linearization: |z|^2 + D x + E y + F = 0.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const cplx& z : points) {
    const Eigen::Vector3d row(z.real(), z.imag(), 1.0);
    ata += row * row.transpose();
    atb += row * (-std::norm(z));
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (!lu.isInvertible())
    throw Error("fit_circle: degenerate point set (collinear or coincident)");
  const Eigen::Vector3d sol = lu.solve(atb);

  CircleFit fit;
  fit.center = cplx(-0.5 * sol(0), -0.5 * sol(1));
  const double radiusSq = 0.25 * (sol(0) * sol(0) + sol(1) * sol(1)) - sol(2);
  if (radiusSq <= 0) throw Error("fit_circle: degenerate fit (non-positive radius)");
  fit.radius = std::sqrt(radiusSq);

  double acc = 0.0;
  for (const cplx& z : points) {
    const double d = std::abs(z - fit.center) - fit.radius;
    acc += d * d;
  }
  fit.rmsResidual = std::sqrt(acc / static_cast<double>(points.size()));
  return fit;
}

RotationEstimate arc_rotation_rate(const RatioSeries& series, const CircleFit& fit,
                                   double blockPeriodS) {
  if (series.values.size() < 2) throw Error("arc_rotation_rate: series too short");
  if (fit.radius < 1e-12) throw Error("arc_rotation_rate: radius below floor, no motion");
  if (fit.rmsResidual >= 0.2 * fit.radius)
    throw Error("arc_rotation_rate: fit residual too large for a reliable arc");

  std::vector<double> angles(series.values.size());
  for (size_t t = 0; t < series.values.size(); ++t)
    angles[t] = std::arg(series.values[t] - fit.center);
  const std::vector<double> unwrapped = unwrap_phase(angles);

  // least-squares slope against block index
  const double T = static_cast<double>(unwrapped.size());
  double meanT = 0.0, meanA = 0.0;
  for (size_t t = 0; t < unwrapped.size(); ++t) {
    meanT += static_cast<double>(t);
    meanA += unwrapped[t];
  }
  meanT /= T;
  meanA /= T;
  double sxx = 0.0, sxy = 0.0;
  for (size_t t = 0; t < unwrapped.size(); ++t) {
    const double dt = static_cast<double>(t) - meanT;
    sxx += dt * dt;
    sxy += dt * (unwrapped[t] - meanA);
  }
  const double slope = sxy / sxx;  // rad per block

  RotationEstimate est;
  est.dopplerHz = slope / (kTwoPi * blockPeriodS);
  est.direction = slope > 0 ? 1 : (slope < 0 ? -1 : 0);
  return est;
}

BackgroundEstimate static_background(const CsiTensor& csi, bool clocksFrozen,
                                     bool preAlignPhase) {
  if (csi.numBlocks < 8) throw Error("static_background: need at least 8 blocks");
  const int N = csi.grid.numSubcarriers;
  const int P = csi.grid.numRxAntennas;
  const int Q = csi.grid.numTxAntennas;
  const int T = csi.numBlocks;

  std::vector<cplx> align(static_cast<size_t>(T), cplx(1.0, 0.0));
  if (!clocksFrozen && preAlignPhase) {
    for (int t = 0; t < T; ++t) {
      cplx sum = 0.0;
      for (int p = 0; p < P; ++p)
        for (int q = 0; q < Q; ++q)
          for (int n = 0; n < N; ++n) sum += csi.at(n, t, p, q);
      align[static_cast<size_t>(t)] = std::polar(1.0, -std::arg(sum));
    }
  }

  BackgroundEstimate out;
  out.values.resize(static_cast<int64_t>(N) * P * Q);
  for (int p = 0; p < P; ++p) {
    for (int q = 0; q < Q; ++q) {
      for (int n = 0; n < N; ++n) {
        cplx mean = 0.0;
        for (int t = 0; t < T; ++t) mean += csi.at(n, t, p, q) * align[static_cast<size_t>(t)];
        out.values[out.index(n, p, q, csi.grid)] = mean / static_cast<double>(T);
      }
    }
  }
  out.valid = clocksFrozen || preAlignPhase;
  return out;
}

std::vector<RatioSeries> linearized_ratio(const CsiTensor& csi,
                                          const BackgroundEstimate& background) {
  if (!background.valid) throw Error("linearized_ratio: background estimate flagged invalid");
  const int N = csi.grid.numSubcarriers;
  const int P = csi.grid.numRxAntennas;
  const int Q = csi.grid.numTxAntennas;
  const double floor = 1e-12 * csi.rms();

  std::vector<RatioSeries> out;
  for (int p = 0; p < P; ++p) {
    for (int q = 0; q < Q; ++q) {
      for (int n = 0; n < N; ++n) {
        const cplx denom = background.values[background.index(n, p, q, csi.grid)];
        if (std::abs(denom) < floor)
          throw Error("linearized_ratio: static background below the denominator floor");
        RatioSeries series;
        series.subcarrier = n;
        series.rxAntenna = p;
        series.refAntenna = p;
        series.txAntenna = q;
        series.values.resize(static_cast<size_t>(csi.numBlocks));
        for (int t = 0; t < csi.numBlocks; ++t)
          series.values[static_cast<size_t>(t)] = csi.at(n, t, p, q) / denom;
        out.push_back(std::move(series));
      }
    }
  }
  return out;
}

std::vector<RatioSeries> linearized_ratio_truth(const CsiTensor& csi,
                                                const CsiTensor& staticOnlyCsi) {
  if (csi.numBlocks != staticOnlyCsi.numBlocks || csi.data.size() != staticOnlyCsi.data.size())
    throw Error("linearized_ratio_truth: tensors must share dimensions");
  const int N = csi.grid.numSubcarriers;
  const int P = csi.grid.numRxAntennas;
  const int Q = csi.grid.numTxAntennas;
  const double floor = 1e-12 * staticOnlyCsi.rms();

  std::vector<RatioSeries> out;
  for (int p = 0; p < P; ++p) {
    for (int q = 0; q < Q; ++q) {
      for (int n = 0; n < N; ++n) {
        RatioSeries series;
        series.subcarrier = n;
        series.rxAntenna = p;
        series.refAntenna = p;
        series.txAntenna = q;
        series.values.resize(static_cast<size_t>(csi.numBlocks));
        for (int t = 0; t < csi.numBlocks; ++t) {
          const cplx denom = staticOnlyCsi.at(n, t, p, q);
          if (std::abs(denom) < floor)
            throw Error("linearized_ratio_truth: static background below the floor");
          series.values[static_cast<size_t>(t)] = csi.at(n, t, p, q) / denom;
        }
        out.push_back(std::move(series));
      }
    }
  }
  return out;
}

namespace {

// Spread of the angular increments around the fitted center, normalized by
// the mean increment. Small values mean a steady rotation: low noise and a
// Moebius pole well away from the arc.
double rotation_nonuniformity(const std::vector<cplx>& values, const cplx& center) {
  if (values.size() < 3) return std::numeric_limits<double>::infinity();
  std::vector<double> angles(values.size());
  for (size_t t = 0; t < values.size(); ++t) angles[t] = std::arg(values[t] - center);
  const std::vector<double> unwrapped = unwrap_phase(angles);
  double mean = 0.0;
  for (size_t i = 0; i + 1 < unwrapped.size(); ++i) mean += unwrapped[i + 1] - unwrapped[i];
  mean /= static_cast<double>(unwrapped.size() - 1);
  double var = 0.0;
  for (size_t i = 0; i + 1 < unwrapped.size(); ++i) {
    const double d = unwrapped[i + 1] - unwrapped[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(unwrapped.size() - 1);
  return std::sqrt(var) / std::max(std::abs(mean), 1e-300);
}

}  // namespace

ArcSeries best_arc_series(const CsiTensor& csi, int refAntenna, int smoothWindow) {
  const int P = csi.grid.numRxAntennas;
  const int Q = csi.grid.numTxAntennas;
  const int N = csi.grid.numSubcarriers;

  struct Candidate {
    ArcSeries arc;
    double quality;
    double uniformity;
  };
  std::vector<Candidate> candidates;
  for (int p = 0; p < P; ++p) {
    if (p == refAntenna) continue;
    for (int q = 0; q < Q; ++q) {
      for (int n = 0; n < N; ++n) {
        try {
          RatioSeries series = csi_ratio(csi, refAntenna, n, p, q);
          series.values = smooth_series(series.values, smoothWindow);
          const CircleFit fit = fit_circle(series.values);
          Candidate cand;
          cand.quality = fit.rmsResidual / fit.radius;
          cand.uniformity = rotation_nonuniformity(series.values, fit.center);
          cand.arc.series = std::move(series);
          cand.arc.fit = fit;
          candidates.push_back(std::move(cand));
        } catch (const Error&) {
          continue;  // degenerate series lose the selection
        }
      }
    }
  }
  if (candidates.empty()) throw Error("best_arc_series: no ratio series admits a circle fit");

  // among fits close to the best residual ratio, take the steadiest rotation
  double minQuality = std::numeric_limits<double>::infinity();
  for (const Candidate& cand : candidates) minQuality = std::min(minQuality, cand.quality);
  const double eligible = 1.1 * minQuality + 1e-12;
  const Candidate* best = nullptr;
  for (const Candidate& cand : candidates)
    if (cand.quality <= eligible && (!best || cand.uniformity < best->uniformity)) best = &cand;
  return best->arc;
}

std::vector<cplx> smooth_series(const std::vector<cplx>& values, int window) {
  if (window <= 1) return values;
  if (static_cast<size_t>(window) > values.size())
    throw Error("smooth_series: window longer than the series");
  std::vector<cplx> out(values.size() - static_cast<size_t>(window) + 1);
  cplx acc = 0.0;
  for (int k = 0; k < window; ++k) acc += values[static_cast<size_t>(k)];
  out[0] = acc / static_cast<double>(window);
  for (size_t i = 1; i < out.size(); ++i) {
    acc += values[i + static_cast<size_t>(window) - 1] - values[i - 1];
    out[i] = acc / static_cast<double>(window);
  }
  return out;
}

}  // namespace asense::casr
