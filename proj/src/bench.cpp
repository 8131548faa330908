#include "asense/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <future>
#include <map>
#include <set>

#include "asense/cacc.hpp"
#include "asense/casr.hpp"
#include "asense/estimators.hpp"
#include "asense/gps_timestamp.hpp"
#include "asense/io.hpp"
#include "json.hpp"

namespace asense::bench {

namespace {

using nlohmann::json;

std::vector<double> symmetric_grid(double span, double step) {
  const int half = static_cast<int>(std::round(span / step));
  std::vector<double> grid;
  grid.reserve(static_cast<size_t>(2 * half + 1));
  for (int i = -half; i <= half; ++i) grid.push_back(i * step);
  return grid;
}

std::vector<ClockState> zero_clock_trace(int numBlocks) {
  ClockState s;
  s.stabilityPpm = 0.0;
  s.phaseMode = PhaseMode::Frozen;
  return std::vector<ClockState>(static_cast<size_t>(numBlocks), s);
}

// ---------------------------------------------------------------------------
// scenario generators

struct CsiTrial {
  CsiTensor csi;
  std::optional<CsiTensor> staticOnly;
  double truthDopplerHz = 0.0;
  double truthRelDelayS = 0.0;
  double sweepMaxHz = 0.0;
  double sweepRateHz = 0.0;
  double rotationHz = 0.0;
  double rotationHz2 = 0.0;
};

struct ToaTrial {
  net::ToaFrame frame;
  net::RruSet rrus;
  Vec2 txPos;
  Vec2 truth;
  Vec2 init;
  net::EmModel model;
  bool truthUpperHalf = true;  // side of the RRU0->RRU1 baseline
  uint64_t seed = 0;
};

struct PpsTrial {
  std::vector<gpsta::PpsRecord> records;
  gpsta::CounterModel model;
  gpsta::TrueClock clock;
  double midTimeS = 0.0;
  double midCounterTicks = 0.0;
};

std::vector<ClockState> trial_clock_trace(const ScenarioSpec& s, int numBlocks, Rng& rng) {
  if (s.frozenClocks) return zero_clock_trace(numBlocks);
  const ClockState initial = draw_initial_clock(s.stabilityPpm, PhaseMode::PerBlockUniform,
                                                s.grid.carrierFrequencyHz, 1e-6, rng);
  return make_clock_trace(initial, numBlocks, s.grid, rng);
}

std::optional<NoiseSpec> trial_noise(const ScenarioSpec& s, Rng& rng) {
  if (!s.snrDb) return std::nullopt;
  return NoiseSpec{*s.snrDb, rng()};
}

CsiTrial make_los_dynamic(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  CsiTrial trial;
  trial.truthRelDelayS = s.relDelayS;
  trial.truthDopplerHz = s.dopplerHz;

  Path los;
  los.isLos = true;
  los.delayS = 2e-9;
  los.amplitude = {1.0, 0.0};

  Path dyn;
  dyn.delayS = los.delayS + s.relDelayS;
  dyn.dopplerHz = s.dopplerHz;
  dyn.amplitude = std::polar(std::pow(10.0, -s.losDb / 20.0), uniform(rng, 0.0, kTwoPi));
  dyn.aoaRad = 0.6;

  const auto trace = trial_clock_trace(s, s.numBlocks, rng);
  trial.csi = synthesize_csi({los, dyn}, s.grid, trace, s.numBlocks, trial_noise(s, rng));
  return trial;
}

CsiTrial make_walker(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  CsiTrial trial;
  trial.sweepMaxHz = s.sweepMaxHz;
  trial.sweepRateHz = s.sweepRateHz;

  Path los;
  los.isLos = true;
  los.delayS = 2e-9;
  los.amplitude = {1.0, 0.0};

  Path walker;
  walker.delayS = 152e-9;
  walker.amplitude = std::polar(std::pow(10.0, -s.losDb / 20.0), uniform(rng, 0.0, kTwoPi));
  walker.aoaRad = 0.7;

  Path staticRefl;
  staticRefl.delayS = 402e-9;
  staticRefl.amplitude = std::polar(0.1, uniform(rng, 0.0, kTwoPi));
  staticRefl.aoaRad = -0.4;

  const int T = s.numBlocks;
  std::vector<std::vector<double>> phases(3, std::vector<double>(static_cast<size_t>(T), 0.0));
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    const double fD = s.sweepMaxHz * std::sin(kTwoPi * s.sweepRateHz * t * s.grid.blockPeriodS);
    if (t > 0) acc += kTwoPi * fD * s.grid.blockPeriodS;
    phases[1][static_cast<size_t>(t)] = acc;
  }

  const auto trace = trial_clock_trace(s, T, rng);
  trial.csi = synthesize_csi_phased({los, walker, staticRefl}, phases, s.grid, trace, T,
                                    trial_noise(s, rng));
  return trial;
}

CsiTrial make_respiration(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  CsiTrial trial;
  trial.rotationHz = s.rotationHz;
  trial.rotationHz2 = s.rotationHz2;
  trial.truthDopplerHz = s.rotationHz;

  Path los;
  los.isLos = true;
  los.delayS = 2e-9;
  los.amplitude = {1.0, 0.0};

  Path staticRefl;
  staticRefl.delayS = 302e-9;
  staticRefl.amplitude = std::polar(0.3, uniform(rng, 0.0, kTwoPi));
  staticRefl.aoaRad = -0.5;

  std::vector<Path> paths = {los, staticRefl};
  Path dyn;
  dyn.delayS = 252e-9;
  dyn.dopplerHz = s.rotationHz;
  dyn.amplitude = std::polar(std::pow(10.0, -s.losDb / 20.0), uniform(rng, 0.0, kTwoPi));
  dyn.aoaRad = 0.5;
  paths.push_back(dyn);
  if (s.rotationHz2 > 0.0) {
    Path dyn2 = dyn;
    dyn2.delayS = 352e-9;
    dyn2.dopplerHz = s.rotationHz2;
    dyn2.amplitude = std::polar(0.8 * std::abs(dyn.amplitude), uniform(rng, 0.0, kTwoPi));
    dyn2.aoaRad = -0.2;
    paths.push_back(dyn2);
  }

  Rng clockRng(rng());
  const auto trace = trial_clock_trace(s, s.numBlocks, clockRng);
  trial.csi = synthesize_csi(paths, s.grid, trace, s.numBlocks, trial_noise(s, rng));
  trial.staticOnly = synthesize_csi({los, staticRefl}, s.grid, trace, s.numBlocks);
  return trial;
}

CsiTrial make_random_multipath(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  Scenario scenario;
  scenario.seed = seed;
  scenario.txPosition = {0.0, 0.0};
  scenario.rxPosition = {uniform(rng, 3.0, 10.0), 0.0};
  const int count = std::uniform_int_distribution<int>(0, std::max(0, s.maxReflectors))(rng);
  for (int k = 0; k < count; ++k) {
    Reflector r;
    r.position = {uniform(rng, 1.0, 9.0), uniform(rng, 1.0, 6.0)};
    r.velocity = {uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
    r.reflectivity = std::polar(uniform(rng, 0.5, 2.0), uniform(rng, 0.0, kTwoPi));
    scenario.reflectors.push_back(r);
  }

  const std::vector<Path> paths = geometry_to_paths(scenario, s.grid);
  CsiTrial trial;
  double best = -1.0;
  for (const Path& p : paths) {
    if (p.isLos) continue;
    if (std::abs(p.amplitude) > best) {
      best = std::abs(p.amplitude);
      trial.truthDopplerHz = p.dopplerHz;
      trial.truthRelDelayS = p.delayS - paths.front().delayS;
    }
  }
  const auto trace = trial_clock_trace(s, s.numBlocks, rng);
  trial.csi = synthesize_csi(paths, s.grid, trace, s.numBlocks, trial_noise(s, rng));
  return trial;
}

ToaTrial make_toa_static(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  ToaTrial trial;
  trial.seed = seed;
  trial.txPos = {0.0, -15.0};
  const double radius = uniform(rng, 20.0, 40.0);
  for (int i = 0; i < s.numRrus; ++i) {
    const double angle = kTwoPi * i / s.numRrus + uniform(rng, -0.3, 0.3);
    trial.rrus.positions.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  trial.rrus.synchronized = true;
  trial.truth = {uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)};
  trial.init = trial.truth + Vec2{uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)};

  trial.model.offsetWalkSigmaS = s.offsetWalkNs * 1e-9;
  trial.model.initOffsetSigmaS = s.offsetWalkNs * 1e-9;
  trial.model.toaNoiseSigmaS = s.toaNoiseNs * 1e-9;

  const std::vector<Vec2> positions(static_cast<size_t>(s.numSlots), trial.truth);
  trial.frame = net::simulate_toa(trial.rrus, trial.txPos, positions, 0.0, trial.model, rng);

  const Vec2 u = trial.rrus.positions[1] - trial.rrus.positions[0];
  const Vec2 v = trial.truth - trial.rrus.positions[0];
  trial.truthUpperHalf = (u.x * v.y - u.y * v.x) > 0;
  return trial;
}

PpsTrial make_pps(const ScenarioSpec& s, uint64_t seed) {
  Rng rng(seed);
  PpsTrial trial;
  trial.model.nominalRateHz = s.counterRateHz;
  trial.model.skewPpm = s.skewPpm;
  trial.model.ppsTimeNoiseSigmaS = s.ppsSigmaNs * 1e-9;
  trial.model.counterReadJitterTicks = 0;
  trial.records = gpsta::simulate_pps(trial.model, trial.clock, s.ppsCount, rng);
  trial.midTimeS = 0.5 * (s.ppsCount - 1);
  trial.midCounterTicks = gpsta::true_counter_ticks(trial.model, trial.clock, trial.midTimeS);
  return trial;
}

// ---------------------------------------------------------------------------
// method pipelines

double spectrum_value_near(const Spectrum2D& s, double delayS, double dopplerHz) {
  const double dStep = s.delayStep(), fStep = s.dopplerStep();
  if (dStep <= 0 || fStep <= 0) return 0.0;
  const int di = static_cast<int>(std::round((delayS - s.delayAxisS.front()) / dStep));
  const int fi = static_cast<int>(std::round((dopplerHz - s.dopplerAxisHz.front()) / fStep));
  double best = 0.0;
  for (int a = di - 1; a <= di + 1; ++a)
    for (int b = fi - 1; b <= fi + 1; ++b)
      if (a >= 0 && a < s.values.rows() && b >= 0 && b < s.values.cols())
        best = std::max(best, s.values(a, b));
  return best;
}

cacc::CaccTensor cacc_pipeline(const MethodSpec& m, const CsiTensor& csi, bool addMinus) {
  cacc::CaccTensor x = addMinus ? cacc::add_minus(csi, 0, std::nullopt, std::nullopt, m.c0)
                                : cacc::cross_correlate(csi, 0);
  if (m.filter && x.numBlocks >= m.filterTaps) {
    const double fs = 1.0 / csi.grid.blockPeriodS;
    // keep DC inside the stopband: the Hamming transition width is ~3.3/taps
    const double low = m.filterLowHz > 0 ? m.filterLowHz : 1.2 * 3.3 / m.filterTaps * fs;
    x = cacc::static_filter(x, low, 0.45 * fs, m.filterTaps);
  }
  return x;
}

TrialResult run_cacc_spectrum(const MethodSpec& m, const CsiTrial& trial, bool addMinus) {
  TrialResult r;
  const cacc::CaccTensor x = cacc_pipeline(m, trial.csi, addMinus);
  const Spectrum2D s = cacc::relative_spectrum(x, 0, 4);
  const PeakSet peaks = peak_extract(s, 8, 0.02);
  if (peaks.empty()) throw Error("no spectral peak above threshold");
  r.estimate = peaks[0].dopplerHz;
  r.truth = trial.truthDopplerHz;
  r.estimate2 = peaks[0].delayS;
  r.truth2 = trial.truthRelDelayS;
  r.hasSecondary = true;
  r.scalarError = r.estimate - r.truth;
  const double truePeak = spectrum_value_near(s, trial.truthRelDelayS, trial.truthDopplerHz);
  const double imagePeak = spectrum_value_near(s, -trial.truthRelDelayS, -trial.truthDopplerHz);
  if (truePeak > 0) r.imageToTrue = std::sqrt(imagePeak / truePeak);
  return r;
}

TrialResult run_cacc_mirrored(const MethodSpec& m, const CsiTrial& trial,
                              const ScenarioSpec& spec) {
  TrialResult r;
  const cacc::CaccTensor x = cacc_pipeline(m, trial.csi, /*addMinus=*/true);
  const double nyq = 0.5 / spec.grid.blockPeriodS;
  const std::vector<double> delayGrid = symmetric_grid(m.delaySpanS, m.delayStepS);
  const std::vector<double> dopplerGrid = symmetric_grid(0.9 * nyq, m.dopplerStepHz);
  const PeakSet peaks = cacc::mirrored_music(x, m.modelOrder, delayGrid, dopplerGrid);
  if (peaks.empty()) throw Error("mirrored search returned no peaks");
  r.estimate = peaks[0].dopplerHz;
  r.truth = trial.truthDopplerHz;
  r.estimate2 = peaks[0].delayS;
  r.truth2 = trial.truthRelDelayS;
  r.hasSecondary = true;
  r.scalarError = r.estimate - r.truth;
  r.imageToTrue = (r.estimate * trial.truthDopplerHz >= 0.0) ? 0.0 : 1.0;
  return r;
}

TrialResult run_cacc_dfs(const MethodSpec& m, const CsiTrial& trial, const ScenarioSpec& spec) {
  TrialResult r;
  const double nyq = 0.5 / spec.grid.blockPeriodS;
  const std::vector<double> grid = symmetric_grid(0.9 * nyq, m.dopplerStepHz);
  const PeakSet peaks =
      cacc::dfs_doppler(trial.csi, 0, m.modelOrder, grid, m.smoothWindow);
  if (peaks.empty()) throw Error("dfs search returned no peaks");
  r.estimate = peaks[0].dopplerHz;
  r.truth = trial.truthDopplerHz;
  r.scalarError = r.estimate - r.truth;
  return r;
}

double walker_truth(const CsiTrial& trial, const ScenarioSpec& spec, double blockIndex) {
  return trial.sweepMaxHz *
         std::sin(kTwoPi * trial.sweepRateHz * blockIndex * spec.grid.blockPeriodS);
}

TrialResult run_walker_addminus(const MethodSpec& m, const CsiTrial& trial,
                                const ScenarioSpec& spec) {
  const cacc::CaccTensor x = cacc_pipeline(m, trial.csi, /*addMinus=*/true);
  const int W = m.trackWindow;
  if (x.numBlocks < W) throw Error("track window longer than the filtered capture");

  std::vector<double> errors;
  const int N = spec.grid.numSubcarriers;
  for (int t0 = 0; t0 + W <= x.numBlocks; t0 += m.trackHop) {
    Eigen::MatrixXcd windowed(N, W);
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < W; ++t) windowed(n, t) = x.at(0, n, t0 + t);
    const Spectrum2D s = periodogram_2d(windowed, spec.grid, 4);
    const PeakSet peaks = peak_extract(s, 4, 0.05);
    if (peaks.empty()) continue;
    const double center = x.firstBlock + t0 + 0.5 * W;
    errors.push_back(peaks[0].dopplerHz - walker_truth(trial, spec, center));
  }
  if (errors.size() < 4) throw Error("too few tracked windows");

  TrialResult r;
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  r.trackStd = std::sqrt(var / static_cast<double>(errors.size()));
  r.estimate = mean;
  r.truth = 0.0;
  r.scalarError = mean;
  return r;
}

TrialResult run_walker_dfs(const MethodSpec& m, const CsiTrial& trial,
                           const ScenarioSpec& spec) {
  const Eigen::MatrixXcd ratio = cacc::dfs_ratio_snapshots(trial.csi, 0);
  const int W = m.trackWindow;
  const int T = static_cast<int>(ratio.rows());
  if (T < W) throw Error("track window longer than the capture");
  const double Ts = spec.grid.blockPeriodS;
  const double nyq = 0.5 / Ts;
  const std::vector<double> grid = symmetric_grid(0.9 * nyq, m.dopplerStepHz);
  const int smooth = std::max(4, 3 * W / 4);

  std::vector<double> errors;
  for (int t0 = 0; t0 + W <= T; t0 += m.trackHop) {
    const Eigen::MatrixXcd windowed = ratio.middleRows(t0, W);
    const MusicResult music = music_spectrum(
        windowed,
        [&](double f) {
          Eigen::VectorXcd a(smooth);
          for (int t = 0; t < smooth; ++t) a(t) = std::polar(1.0, kTwoPi * f * t * Ts);
          return a;
        },
        m.modelOrder, smooth, grid);
    const auto peaks = peak_extract_1d(music.paramGrid, music.pseudoSpectrum, 1, 1e-6);
    if (peaks.empty()) continue;
    const double center = t0 + 0.5 * W;
    errors.push_back(peaks[0].first - walker_truth(trial, spec, center));
  }
  if (errors.size() < 4) throw Error("too few tracked windows");

  TrialResult r;
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  r.trackStd = std::sqrt(var / static_cast<double>(errors.size()));
  r.estimate = mean;
  r.truth = 0.0;
  r.scalarError = mean;
  return r;
}

TrialResult run_casr_arc(const MethodSpec& m, const CsiTrial& trial, const ScenarioSpec& spec) {
  TrialResult r;
  const int window = m.smoothWindow > 0 ? m.smoothWindow : (spec.snrDb ? 21 : 1);
  casr::ArcSeries arc;
  if (m.subcarrier >= 0) {
    arc.series = casr::csi_ratio(trial.csi, 0, m.subcarrier, 1, 0);
    arc.series.values = casr::smooth_series(arc.series.values, window);
    arc.fit = casr::fit_circle(arc.series.values);
  } else {
    arc = casr::best_arc_series(trial.csi, 0, window);
  }
  const casr::RotationEstimate rot =
      casr::arc_rotation_rate(arc.series, arc.fit, spec.grid.blockPeriodS);
  r.estimate = rot.dopplerHz;
  r.truth = trial.truthDopplerHz;
  r.scalarError = r.estimate - r.truth;
  r.imageToTrue = arc.fit.radius > 0 ? arc.fit.rmsResidual / arc.fit.radius : -1.0;
  return r;
}

TrialResult run_casr_linearized(const MethodSpec& m, const CsiTrial& trial,
                                const ScenarioSpec& spec) {
  (void)m;
  if (!trial.staticOnly)
    throw Error("linearized ratio needs the scenario's static-only reference");
  const auto ratios = casr::linearized_ratio_truth(trial.csi, *trial.staticOnly);

  // incoherently averaged periodogram of (R - 1), scanned over the slow
  // rotation band only
  const int T = trial.csi.numBlocks;
  const double Ts = spec.grid.blockPeriodS;
  const double span = std::min(0.45 / Ts, 3.0 * std::max({trial.rotationHz,
                                                          trial.rotationHz2, 1.0}));
  const double step = 1.0 / (4.0 * T * Ts);
  const std::vector<double> axis = symmetric_grid(span, step);
  std::vector<double> power(axis.size(), 0.0);
  for (const auto& series : ratios) {
    for (size_t j = 0; j < axis.size(); ++j) {
      cplx acc = 0.0;
      for (int t = 0; t < T; ++t)
        acc += (series.values[static_cast<size_t>(t)] - cplx(1.0, 0.0)) *
               std::polar(1.0, -kTwoPi * axis[j] * t * Ts);
      power[j] += std::norm(acc);
    }
  }
  const auto peaks = peak_extract_1d(axis, power, 4, 0.05);
  if (peaks.empty()) throw Error("no linearized-ratio peak above threshold");

  TrialResult r;
  r.estimate = peaks[0].first;
  r.truth = trial.rotationHz;
  r.scalarError = r.estimate - r.truth;
  return r;
}

TrialResult position_result(const Vec2& estimate, const Vec2& truth) {
  TrialResult r;
  r.estimate = estimate.x;
  r.truth = truth.x;
  r.estimate2 = estimate.y;
  r.truth2 = truth.y;
  r.hasSecondary = true;
  r.scalarError = distance(estimate, truth);
  return r;
}

TrialResult run_net_method(const std::string& name, const MethodSpec& m, const ToaTrial& trial) {
  if (name == "net.toa") {
    const net::ToaLsqResult lsq =
        net::toa_least_squares(trial.frame, trial.rrus, trial.txPos, trial.init, true);
    return position_result(lsq.trajectory[0], trial.truth);
  }
  if (name == "net.em") {
    net::EmOptions options;
    options.staticTarget = true;
    const net::EmResult em = net::em_localize(trial.frame, trial.rrus, trial.txPos,
                                              trial.model, trial.init, options);
    return position_result(em.trajectory[0], trial.truth);
  }
  if (name == "net.tdoa") {
    const net::TdoaSet tdoas = net::toa_to_tdoa(trial.frame, 0);
    std::vector<double> averaged(static_cast<size_t>(tdoas.valuesS.cols()));
    for (int k = 0; k < tdoas.valuesS.cols(); ++k)
      averaged[static_cast<size_t>(k)] = tdoas.valuesS.col(k).mean();
    const net::TdoaSolveResult sol =
        net::solve_tdoa(averaged, trial.rrus, 0, trial.txPos, trial.init);
    return position_result(sol.position, trial.truth);
  }
  if (name == "net.aoa") {
    Rng rng(trial.seed ^ 0x9e3779b97f4a7c15ull);
    auto [a, b] = net::aoa_from_truth(trial.rrus.positions[0], trial.rrus.positions[1],
                                      trial.truth);
    a += gaussian(rng, 0.0, m.aoaNoiseRad);
    b += gaussian(rng, 0.0, m.aoaNoiseRad);
    const Vec2 est = net::solve_aoa(trial.rrus.positions[0], trial.rrus.positions[1], a, b,
                                    trial.truthUpperHalf);
    return position_result(est, trial.truth);
  }
  throw Error("unhandled net method: " + name);
}

TrialResult run_pps_method(const std::string& name, const PpsTrial& trial) {
  gpsta::TimestampFit fit;
  if (name == "gpsta.twopoint")
    fit = gpsta::two_point_fit(trial.records.front(), trial.records.back());
  else
    fit = gpsta::multi_point_fit(trial.records);

  TrialResult r;
  r.estimate = fit.timestamp(trial.midCounterTicks);
  r.truth = trial.midTimeS;
  r.scalarError = r.estimate - r.truth;
  return r;
}

// ---------------------------------------------------------------------------
// config parsing

const std::set<std::string> kCsiMethods = {"cacc.plain",   "cacc.addminus", "cacc.mirrored",
                                           "cacc.dfs",     "casr.arc",      "casr.linearized"};
const std::set<std::string> kToaMethods = {"net.toa", "net.tdoa", "net.aoa", "net.em"};
const std::set<std::string> kPpsMethods = {"gpsta.twopoint", "gpsta.multipoint"};

bool is_csi_kind(ScenarioKind k) {
  return k == ScenarioKind::LosDynamic || k == ScenarioKind::Walker ||
         k == ScenarioKind::Respiration || k == ScenarioKind::RandomMultipath;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + where + "." + key + "'");
  }
}

double get_number(const json& j, const std::string& key, double fallback,
                  const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError("config: " + where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    throw ConfigError("config: " + where + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean())
    throw ConfigError("config: " + where + "." + key + " must be a boolean");
  return j.at(key).get<bool>();
}

OfdmGrid parse_grid(const json& j) {
  OfdmGrid g;
  require_keys(j, {"numSubcarriers", "subcarrierSpacingHz", "blockPeriodS", "numRxAntennas",
                   "numTxAntennas", "carrierFrequencyHz", "rxElementSpacingM",
                   "txElementSpacingM"},
               "scenario.grid");
  g.numSubcarriers = get_int(j, "numSubcarriers", 32, "scenario.grid");
  g.subcarrierSpacingHz = get_number(j, "subcarrierSpacingHz", 312.5e3, "scenario.grid");
  g.blockPeriodS = get_number(j, "blockPeriodS", 5e-3, "scenario.grid");
  g.numRxAntennas = get_int(j, "numRxAntennas", 2, "scenario.grid");
  g.numTxAntennas = get_int(j, "numTxAntennas", 1, "scenario.grid");
  g.carrierFrequencyHz = get_number(j, "carrierFrequencyHz", 5.8e9, "scenario.grid");
  g.rxElementSpacingM = get_number(j, "rxElementSpacingM", 0.0, "scenario.grid");
  g.txElementSpacingM = get_number(j, "txElementSpacingM", 0.0, "scenario.grid");
  try {
    for (const std::string& warning : g.validate())
      std::cerr << "config warning: scenario.grid: " << warning << "\n";
  } catch (const Error& e) {
    throw ConfigError(std::string("config: scenario.grid invalid: ") + e.what());
  }
  return g;
}

ScenarioSpec parse_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("config: scenario must be an object");
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw ConfigError("config: scenario.kind must be a string");
  const std::string kind = j.at("kind").get<std::string>();

  ScenarioSpec s;
  s.grid.numSubcarriers = 32;
  if (kind == "los_dynamic") {
    s.kind = ScenarioKind::LosDynamic;
  } else if (kind == "walker") {
    s.kind = ScenarioKind::Walker;
    s.grid.numSubcarriers = 16;
    s.grid.numRxAntennas = 4;
    s.numBlocks = 600;
    s.losDb = 14.0;
    s.snrDb = 15.0;
  } else if (kind == "respiration") {
    s.kind = ScenarioKind::Respiration;
    s.grid.numSubcarriers = 8;
    s.numBlocks = 800;
    s.losDb = 6.0;
    s.frozenClocks = false;
  } else if (kind == "random_multipath") {
    s.kind = ScenarioKind::RandomMultipath;
    s.frozenClocks = false;
  } else if (kind == "toa_static") {
    s.kind = ScenarioKind::ToaStatic;
  } else if (kind == "pps") {
    s.kind = ScenarioKind::Pps;
  } else {
    throw ConfigError("config: scenario.kind '" + kind + "' is not a known scenario");
  }

  require_keys(j, {"kind", "grid", "numBlocks", "losDb", "snrDb", "frozenClocks",
                   "stabilityPpm", "relDelayNs", "dopplerHz", "sweepMaxHz", "sweepRateHz",
                   "rotationHz", "rotationHz2", "maxReflectors", "numRrus", "numSlots",
                   "offsetWalkNs", "toaNoiseNs", "ppsCount", "ppsSigmaNs", "skewPpm",
                   "counterRateHz"},
               "scenario");
  if (j.contains("grid")) s.grid = parse_grid(j.at("grid"));
  s.numBlocks = get_int(j, "numBlocks", s.numBlocks, "scenario");
  s.losDb = get_number(j, "losDb", s.losDb, "scenario");
  if (j.contains("snrDb")) {
    if (j.at("snrDb").is_null())
      s.snrDb.reset();
    else if (j.at("snrDb").is_number())
      s.snrDb = j.at("snrDb").get<double>();
    else
      throw ConfigError("config: scenario.snrDb must be a number or null");
  }
  s.frozenClocks = get_bool(j, "frozenClocks", s.frozenClocks, "scenario");
  s.stabilityPpm = get_number(j, "stabilityPpm", s.stabilityPpm, "scenario");
  s.relDelayS = get_number(j, "relDelayNs", s.relDelayS * 1e9, "scenario") * 1e-9;
  s.dopplerHz = get_number(j, "dopplerHz", s.dopplerHz, "scenario");
  s.sweepMaxHz = get_number(j, "sweepMaxHz", s.sweepMaxHz, "scenario");
  s.sweepRateHz = get_number(j, "sweepRateHz", s.sweepRateHz, "scenario");
  s.rotationHz = get_number(j, "rotationHz", s.rotationHz, "scenario");
  s.rotationHz2 = get_number(j, "rotationHz2", s.rotationHz2, "scenario");
  s.maxReflectors = get_int(j, "maxReflectors", s.maxReflectors, "scenario");
  s.numRrus = get_int(j, "numRrus", s.numRrus, "scenario");
  s.numSlots = get_int(j, "numSlots", s.numSlots, "scenario");
  s.offsetWalkNs = get_number(j, "offsetWalkNs", s.offsetWalkNs, "scenario");
  s.toaNoiseNs = get_number(j, "toaNoiseNs", s.toaNoiseNs, "scenario");
  s.ppsCount = get_int(j, "ppsCount", s.ppsCount, "scenario");
  s.ppsSigmaNs = get_number(j, "ppsSigmaNs", s.ppsSigmaNs, "scenario");
  s.skewPpm = get_number(j, "skewPpm", s.skewPpm, "scenario");
  s.counterRateHz = get_number(j, "counterRateHz", s.counterRateHz, "scenario");

  if (s.numBlocks < 2) throw ConfigError("config: scenario.numBlocks must be >= 2");
  if (s.numRrus < 2) throw ConfigError("config: scenario.numRrus must be >= 2");
  if (s.numSlots < 1) throw ConfigError("config: scenario.numSlots must be >= 1");
  if (s.ppsCount < 2) throw ConfigError("config: scenario.ppsCount must be >= 2");
  return s;
}

MethodSpec parse_method(const json& j, const ScenarioSpec& scenario) {
  if (!j.is_object()) throw ConfigError("config: each methods[] entry must be an object");
  if (!j.contains("name") || !j.at("name").is_string())
    throw ConfigError("config: methods[].name must be a string");

  MethodSpec m;
  m.name = j.at("name").get<std::string>();
  const bool known =
      kCsiMethods.count(m.name) || kToaMethods.count(m.name) || kPpsMethods.count(m.name);
  if (!known) throw ConfigError("config: unknown method name '" + m.name + "'");

  const bool compatible = (is_csi_kind(scenario.kind) && kCsiMethods.count(m.name)) ||
                          (scenario.kind == ScenarioKind::ToaStatic &&
                           kToaMethods.count(m.name)) ||
                          (scenario.kind == ScenarioKind::Pps && kPpsMethods.count(m.name));
  if (!compatible)
    throw ConfigError("config: method '" + m.name + "' does not apply to this scenario kind");

  require_keys(j, {"name", "filterLowHz", "filterTaps", "filter", "modelOrder", "delaySpanNs",
                   "delayStepNs", "dopplerStepHz", "trackWindow", "trackHop", "smoothWindow",
                   "subcarrier", "c0", "aoaNoiseRad", "ppsCount"},
               "methods[]");
  const std::string where = "methods[]";
  m.filterLowHz = get_number(j, "filterLowHz", m.filterLowHz, where);
  m.filterTaps = get_int(j, "filterTaps", m.filterTaps, where);
  m.filter = get_bool(j, "filter", m.filter, where);
  m.modelOrder = get_int(j, "modelOrder", m.modelOrder, where);
  m.delaySpanS = get_number(j, "delaySpanNs", m.delaySpanS * 1e9, where) * 1e-9;
  m.delayStepS = get_number(j, "delayStepNs", m.delayStepS * 1e9, where) * 1e-9;
  m.dopplerStepHz = get_number(j, "dopplerStepHz", m.dopplerStepHz, where);
  m.trackWindow = get_int(j, "trackWindow", m.trackWindow, where);
  m.trackHop = get_int(j, "trackHop", m.trackHop, where);
  m.smoothWindow = get_int(j, "smoothWindow", m.smoothWindow, where);
  m.subcarrier = get_int(j, "subcarrier", m.subcarrier, where);
  m.c0 = get_number(j, "c0", m.c0, where);
  m.aoaNoiseRad = get_number(j, "aoaNoiseRad", m.aoaNoiseRad, where);
  m.ppsCount = get_int(j, "ppsCount", m.ppsCount, where);
  return m;
}

}  // namespace

RunConfig parse_config(const std::string& jsonText) {
  json j;
  try {
    j = json::parse(jsonText);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  require_keys(j, {"seed", "trials", "jobs", "outDir", "scenario", "methods"}, "");

  RunConfig cfg;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw ConfigError("config: seed must be an integer");
    cfg.seed = j.at("seed").get<uint64_t>();
  }
  cfg.trials = get_int(j, "trials", 1, "");
  if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
  cfg.jobs = get_int(j, "jobs", 1, "");
  if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (j.contains("outDir")) {
    if (!j.at("outDir").is_string()) throw ConfigError("config: outDir must be a string");
    cfg.outDir = j.at("outDir").get<std::string>();
  }
  if (!j.contains("scenario")) throw ConfigError("config: scenario block is required");
  cfg.scenario = parse_scenario(j.at("scenario"));
  if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
    throw ConfigError("config: methods must be a non-empty array");
  for (const auto& entry : j.at("methods")) cfg.methods.push_back(parse_method(entry, cfg.scenario));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

namespace {

TrialResult run_one(const MethodSpec& m, const ScenarioSpec& spec, const CsiTrial* csiTrial,
                    const ToaTrial* toaTrial, const PpsTrial* ppsTrial) {
  if (csiTrial) {
    if (spec.kind == ScenarioKind::Walker && m.name == "cacc.addminus")
      return run_walker_addminus(m, *csiTrial, spec);
    if (spec.kind == ScenarioKind::Walker && m.name == "cacc.dfs")
      return run_walker_dfs(m, *csiTrial, spec);
    if (m.name == "cacc.plain") return run_cacc_spectrum(m, *csiTrial, false);
    if (m.name == "cacc.addminus") return run_cacc_spectrum(m, *csiTrial, true);
    if (m.name == "cacc.mirrored") return run_cacc_mirrored(m, *csiTrial, spec);
    if (m.name == "cacc.dfs") return run_cacc_dfs(m, *csiTrial, spec);
    if (m.name == "casr.arc") return run_casr_arc(m, *csiTrial, spec);
    if (m.name == "casr.linearized") return run_casr_linearized(m, *csiTrial, spec);
  }
  if (toaTrial) return run_net_method(m.name, m, *toaTrial);
  if (ppsTrial) return run_pps_method(m.name, *ppsTrial);
  throw Error("method/scenario mismatch: " + m.name);
}

std::string sanitize(const std::string& text) {
  std::string out = text;
  for (char& c : out)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return out;
}

std::string csv_field(double v, bool present = true) {
  return present ? io::format_double(v) : std::string();
}

}  // namespace

std::vector<MethodSummary> run_config(const RunConfig& config, const std::string& outDir) {
  const int trials = config.trials;
  const size_t numMethods = config.methods.size();
  std::vector<std::vector<TrialResult>> results(numMethods);
  for (auto& v : results) v.resize(static_cast<size_t>(trials));

  auto runTrial = [&](int trialIndex) {
    const uint64_t seed = config.seed + static_cast<uint64_t>(trialIndex);
    CsiTrial csiTrial;
    ToaTrial toaTrial;
    PpsTrial ppsTrial;
    const CsiTrial* csiPtr = nullptr;
    const ToaTrial* toaPtr = nullptr;
    const PpsTrial* ppsPtr = nullptr;
    try {
      switch (config.scenario.kind) {
        case ScenarioKind::LosDynamic:
          csiTrial = make_los_dynamic(config.scenario, seed);
          csiPtr = &csiTrial;
          break;
        case ScenarioKind::Walker:
          csiTrial = make_walker(config.scenario, seed);
          csiPtr = &csiTrial;
          break;
        case ScenarioKind::Respiration:
          csiTrial = make_respiration(config.scenario, seed);
          csiPtr = &csiTrial;
          break;
        case ScenarioKind::RandomMultipath:
          csiTrial = make_random_multipath(config.scenario, seed);
          csiPtr = &csiTrial;
          break;
        case ScenarioKind::ToaStatic:
          toaTrial = make_toa_static(config.scenario, seed);
          toaPtr = &toaTrial;
          break;
        case ScenarioKind::Pps:
          ppsTrial = make_pps(config.scenario, seed);
          ppsPtr = &ppsTrial;
          break;
      }
    } catch (const std::exception& e) {
      for (size_t mi = 0; mi < numMethods; ++mi) {
        TrialResult r;
        r.seed = seed;
        r.failed = true;
        r.error = std::string("scenario: ") + e.what();
        results[mi][static_cast<size_t>(trialIndex)] = r;
      }
      return;
    }

    for (size_t mi = 0; mi < numMethods; ++mi) {
      TrialResult r;
      try {
        r = run_one(config.methods[mi], config.scenario, csiPtr, toaPtr, ppsPtr);
      } catch (const std::exception& e) {
        r = TrialResult{};
        r.failed = true;
        r.error = e.what();
      }
      r.seed = seed;
      results[mi][static_cast<size_t>(trialIndex)] = r;
    }
  };

  if (config.jobs <= 1) {
    for (int i = 0; i < trials; ++i) runTrial(i);
  } else {
    // fixed per-trial seeds keep the outcome independent of the partitioning
    std::vector<std::future<void>> workers;
    std::atomic<int> next{0};
    const int workerCount = std::min(config.jobs, trials);
    for (int w = 0; w < workerCount; ++w)
      workers.push_back(std::async(std::launch::async, [&]() {
        for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) runTrial(i);
      }));
    for (auto& f : workers) f.get();
  }

  std::filesystem::create_directories(outDir);
  std::vector<MethodSummary> summaries;
  std::vector<std::vector<std::string>> summaryRows;
  std::map<std::string, int> nameCounts;
  for (size_t mi = 0; mi < numMethods; ++mi) {
    MethodSummary s;
    s.method = config.methods[mi].name;
    s.trials = trials;
    s.rows = results[mi];

    std::vector<double> errors, images, tracks;
    for (const TrialResult& r : s.rows) {
      if (r.failed) {
        ++s.failures;
        continue;
      }
      errors.push_back(r.scalarError);
      if (r.imageToTrue >= 0) images.push_back(r.imageToTrue);
      if (r.trackStd >= 0) tracks.push_back(r.trackStd);
    }
    if (!errors.empty()) {
      double sum = 0.0, sq = 0.0;
      for (double e : errors) {
        sum += e;
        sq += e * e;
      }
      const double n = static_cast<double>(errors.size());
      s.bias = sum / n;
      s.rmse = std::sqrt(sq / n);
      s.stddev = std::sqrt(std::max(0.0, sq / n - s.bias * s.bias));
    }
    if (!images.empty()) {
      double sum = 0.0;
      for (double v : images) sum += v;
      s.meanImageToTrue = sum / static_cast<double>(images.size());
    }
    if (!tracks.empty()) {
      double sum = 0.0;
      for (double v : tracks) sum += v;
      s.meanTrackStd = sum / static_cast<double>(tracks.size());
    }
    if (s.method.rfind("gpsta.", 0) == 0) {
      const auto acc = gpsta::sync_error_report(gpsta::SyncMethod::Gpsta);
      s.annotation = "gpsta<=" + io::format_double(acc.timeAccuracyHighNs) + "ns";
    }

    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < s.rows.size(); ++i) {
      const TrialResult& r = s.rows[i];
      rows.push_back({std::to_string(i), std::to_string(r.seed),
                      csv_field(r.estimate, !r.failed), csv_field(r.truth, !r.failed),
                      csv_field(r.estimate2, !r.failed && r.hasSecondary),
                      csv_field(r.truth2, !r.failed && r.hasSecondary),
                      csv_field(r.scalarError, !r.failed),
                      csv_field(r.imageToTrue, !r.failed && r.imageToTrue >= 0),
                      csv_field(r.trackStd, !r.failed && r.trackStd >= 0),
                      r.failed ? "error: " + sanitize(r.error) : "ok"});
    }
    const int occurrence = nameCounts[s.method]++;
    const std::string fileName =
        occurrence == 0 ? s.method : s.method + "_" + std::to_string(occurrence);
    io::write_table_csv({"trial", "seed", "estimate", "truth", "estimate2", "truth2", "error",
                         "image_to_true", "track_std", "status"},
                        rows, outDir + "/" + fileName + ".csv");
    summaryRows.push_back({s.method, std::to_string(s.trials), std::to_string(s.failures),
                           csv_field(s.rmse), csv_field(s.bias), csv_field(s.stddev),
                           csv_field(s.meanImageToTrue, s.meanImageToTrue >= 0),
                           csv_field(s.meanTrackStd, s.meanTrackStd >= 0), s.annotation});
    summaries.push_back(std::move(s));
  }
  io::write_table_csv({"method", "trials", "failures", "rmse", "bias", "std",
                       "mean_image_to_true", "mean_track_std", "annotation"},
                      summaryRows, outDir + "/summary.csv");
  return summaries;
}

std::vector<RangingDemoRow> demo_ranging_ambiguity() {
  std::vector<RangingDemoRow> rows;
  for (double ppm : {0.0, 10.0, 20.0}) {
    RangingDemoRow row;
    row.ppm = ppm;
    row.intervalMs = 1.0;
    row.tmoBoundNs = ppm * 1e-6 * 1e-3 * 1e9;
    row.rangeErrorM = kSpeedOfLight * row.tmoBoundNs * 1e-9;

    // empirical check that the walk honors the bound
    Rng rng(42);
    ClockState s;
    s.stabilityPpm = ppm;
    s.phaseMode = PhaseMode::Frozen;
    double maxDrift = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const ClockState next = evolve_clock(s, 1e-3, 5.8e9, rng);
      maxDrift = std::max(maxDrift, std::abs(next.tmoS - s.tmoS));
    }
    row.empiricalMaxDriftNs = maxDrift * 1e9;
    rows.push_back(row);
  }
  return rows;
}

void write_ranging_demo_csv(const std::vector<RangingDemoRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows)
    table.push_back({io::format_double(r.ppm), io::format_double(r.intervalMs),
                     io::format_double(r.tmoBoundNs), io::format_double(r.rangeErrorM),
                     io::format_double(r.empiricalMaxDriftNs)});
  io::write_table_csv({"ppm", "interval_ms", "tmo_bound_ns", "range_error_m",
                       "empirical_max_drift_ns"},
                      table, path);
}

std::vector<CompareRow> compare_methods(const RunConfig& config, const std::string& outDir) {
  if (config.methods.size() < 1) throw ConfigError("config: compare needs at least one method");
  const std::vector<MethodSummary> summaries = run_config(config, outDir);

  std::vector<CompareRow> rows;
  for (const MethodSummary& s : summaries) {
    CompareRow row;
    row.method = s.method;
    row.stddev = s.meanTrackStd >= 0 ? s.meanTrackStd : s.stddev;
    row.rmse = s.rmse;
    row.annotation = s.annotation;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.stddev < b.stddev; });
  return rows;
}

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> table;
  int rank = 1;
  for (const auto& r : rows)
    table.push_back({std::to_string(rank++), r.method, io::format_double(r.stddev),
                     io::format_double(r.rmse), r.annotation});
  io::write_table_csv({"rank", "method", "std", "rmse", "annotation"}, table, path);
}

}  // namespace asense::bench
