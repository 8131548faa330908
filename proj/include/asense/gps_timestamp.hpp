#pragma once

#include <vector>

#include "asense/common.hpp"

namespace asense::gpsta {

// One pulse-per-second event: extracted GPS time plus the local counter value
// latched when the pulse arrived.
struct PpsRecord {
  double gpsTimeS = 0.0;
  double counterTicks = 0.0;
};

// Local free-running counter with a fixed skew and the two measurement error
// sources of the time-stamping chain.
struct CounterModel {
  double nominalRateHz = 1e8;     // ticks per second
  double skewPpm = 0.0;
  double ppsTimeNoiseSigmaS = 0.0;
  int counterReadJitterTicks = 0;
};

// Anchor epoch of the true local clock on the GPS timeline.
struct TrueClock {
  double startGpsTimeS = 0.0;
  double originTicks = 0.0;
};

struct TimestampFit {
  std::vector<PpsRecord> anchors;
  double slopeSecondsPerTick = 0.0;
  double interceptS = 0.0;

  double timestamp(double counterTicks) const {
    return slopeSecondsPerTick * counterTicks + interceptS;
  }
};

enum class SyncMethod { Dte, Gpsdo, Gpsta };

// Reference steady-state accuracy constants for report annotation.
struct SyncAccuracy {
  SyncMethod method;
  double timeAccuracyLowNs;   // 0 when only an upper bound is quoted
  double timeAccuracyHighNs;
  double nominalSyncTimeS;
  std::string suitability;
};

double true_counter_ticks(const CounterModel& model, const TrueClock& clock, double gpsTimeS);

std::vector<PpsRecord> simulate_pps(const CounterModel& model, const TrueClock& clock, int count,
                                    Rng& rng);

TimestampFit two_point_fit(const PpsRecord& first, const PpsRecord& second);

// Ordinary least squares over all anchors; identical to two_point_fit when
// given exactly two records.
TimestampFit multi_point_fit(const std::vector<PpsRecord>& records);

std::vector<double> timestamp_samples(const TimestampFit& fit,
                                      const std::vector<double>& counters);

// Linear interpolation of the complex series onto a uniform target grid.
std::vector<cplx> resample_align(const std::vector<cplx>& samples,
                                 const std::vector<double>& timestampsS,
                                 const std::vector<double>& targetGridS);

SyncAccuracy sync_error_report(SyncMethod method);

}  // namespace asense::gpsta
