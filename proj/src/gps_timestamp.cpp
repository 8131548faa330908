#include "asense/gps_timestamp.hpp"

#include <algorithm>
#include <cmath>

namespace asense::gpsta {

double true_counter_ticks(const CounterModel& model, const TrueClock& clock, double gpsTimeS) {
  const double rate = model.nominalRateHz * (1.0 + model.skewPpm * 1e-6);
  return clock.originTicks + rate * (gpsTimeS - clock.startGpsTimeS);
}

std::vector<PpsRecord> simulate_pps(const CounterModel& model, const TrueClock& clock, int count,
                                    Rng& rng) {
  if (count < 2) throw Error("simulate_pps: need at least two PPS events");
  if (model.nominalRateHz <= 0) throw Error("simulate_pps: nominal rate must be > 0");
  if (model.ppsTimeNoiseSigmaS < 0 || model.counterReadJitterTicks < 0)
    throw Error("simulate_pps: noise parameters must be >= 0");

  std::vector<PpsRecord> records(static_cast<size_t>(count));
  std::uniform_int_distribution<int> jitter(-model.counterReadJitterTicks,
                                            model.counterReadJitterTicks);
  for (int k = 0; k < count; ++k) {
    const double trueSecond = clock.startGpsTimeS + k;
    PpsRecord rec;
    rec.gpsTimeS = trueSecond + gaussian(rng, 0.0, model.ppsTimeNoiseSigmaS);
    rec.counterTicks = std::round(true_counter_ticks(model, clock, trueSecond));
    if (model.counterReadJitterTicks > 0) rec.counterTicks += jitter(rng);
    records[static_cast<size_t>(k)] = rec;
  }
  return records;
}

TimestampFit two_point_fit(const PpsRecord& first, const PpsRecord& second) {
  if (second.counterTicks <= first.counterTicks)
    throw Error("two_point_fit: counter readings must be strictly increasing");
  TimestampFit fit;
  fit.anchors = {first, second};
  fit.slopeSecondsPerTick =
      (second.gpsTimeS - first.gpsTimeS) / (second.counterTicks - first.counterTicks);
  fit.interceptS = first.gpsTimeS - fit.slopeSecondsPerTick * first.counterTicks;
  return fit;
}

TimestampFit multi_point_fit(const std::vector<PpsRecord>& records) {
  if (records.size() < 2) throw Error("multi_point_fit: need at least two records");

  double meanC = 0.0, meanT = 0.0;
  for (const PpsRecord& r : records) {
    meanC += r.counterTicks;
    meanT += r.gpsTimeS;
  }
  meanC /= static_cast<double>(records.size());
  meanT /= static_cast<double>(records.size());

  double sxx = 0.0, sxy = 0.0;
  for (const PpsRecord& r : records) {
    const double dc = r.counterTicks - meanC;
    sxx += dc * dc;
    sxy += dc * (r.gpsTimeS - meanT);
  }
  if (sxx == 0.0) throw Error("multi_point_fit: degenerate anchors (all counters equal)");

  TimestampFit fit;
  fit.anchors = records;
  fit.slopeSecondsPerTick = sxy / sxx;
  fit.interceptS = meanT - fit.slopeSecondsPerTick * meanC;
  if (fit.slopeSecondsPerTick <= 0)
    throw Error("multi_point_fit: non-positive slope, counter is not advancing");
  return fit;
}

std::vector<double> timestamp_samples(const TimestampFit& fit,
                                      const std::vector<double>& counters) {
  std::vector<double> out(counters.size());
  for (size_t i = 0; i < counters.size(); ++i) out[i] = fit.timestamp(counters[i]);
  return out;
}

std::vector<cplx> resample_align(const std::vector<cplx>& samples,
                                 const std::vector<double>& timestampsS,
                                 const std::vector<double>& targetGridS) {
  if (samples.size() != timestampsS.size())
    throw Error("resample_align: samples and timestamps differ in length");
  if (samples.size() < 2) throw Error("resample_align: need at least two samples");
  for (size_t i = 1; i < timestampsS.size(); ++i)
    if (timestampsS[i] <= timestampsS[i - 1])
      throw Error("resample_align: timestamps must be strictly increasing");

  std::vector<cplx> out(targetGridS.size());
  size_t seg = 0;
  for (size_t i = 0; i < targetGridS.size(); ++i) {
    const double t = targetGridS[i];
    if (t < timestampsS.front() || t > timestampsS.back())
      throw Error("resample_align: target point outside the timestamp span");
    while (seg + 2 < timestampsS.size() && timestampsS[seg + 1] < t) ++seg;
    // restart the scan if the target grid is not monotone
    if (timestampsS[seg] > t) {
      seg = 0;
      while (seg + 2 < timestampsS.size() && timestampsS[seg + 1] < t) ++seg;
    }
    const double t0 = timestampsS[seg], t1 = timestampsS[seg + 1];
    const double w = (t - t0) / (t1 - t0);
    out[i] = samples[seg] * (1.0 - w) + samples[seg + 1] * w;
  }
  return out;
}

SyncAccuracy sync_error_report(SyncMethod method) {
  switch (method) {
    case SyncMethod::Dte:
      return {method, 3.0, 10.0, 1000.0, "low"};
    case SyncMethod::Gpsdo:
      return {method, 0.0, 5.5, 100.0, "static sensing scenarios"};
    case SyncMethod::Gpsta:
      return {method, 0.0, 42.0, 1.0, "static and mobile"};
  }
  throw Error("sync_error_report: unknown method");
}

}  // namespace asense::gpsta
