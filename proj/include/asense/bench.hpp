#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asense/networked.hpp"
#include "asense/signal_model.hpp"

namespace asense::bench {

// Raised for configuration/schema problems; the CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

struct MethodSpec {
  std::string name;
  // knobs shared by the estimation pipelines; parsed strictly from JSON
  double filterLowHz = 0.0;  // 0 -> just above the filter transition width
  int filterTaps = 65;
  bool filter = true;
  int modelOrder = 1;
  double delaySpanS = 400e-9;
  double delayStepS = 5e-9;
  double dopplerStepHz = 0.25;
  int trackWindow = 32;
  int trackHop = 16;
  int smoothWindow = 0;     // casr circle-fit smoothing; 0 -> auto
  int subcarrier = -1;      // casr series choice; -1 -> best-fit selection
  double c0 = 1.0;          // add-minus constant scale
  double aoaNoiseRad = 0.0;
  int ppsCount = 8;
};

enum class ScenarioKind { LosDynamic, Walker, Respiration, RandomMultipath, ToaStatic, Pps };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::LosDynamic;
  // csi-style scenarios
  OfdmGrid grid;
  int numBlocks = 128;
  double losDb = 20.0;              // LOS power above the dynamic path
  std::optional<double> snrDb;      // absent -> noiseless
  bool frozenClocks = true;
  double stabilityPpm = 20.0;
  double relDelayS = 200e-9;
  double dopplerHz = 25.0;
  double sweepMaxHz = 40.0;         // walker
  double sweepRateHz = 0.33;
  double rotationHz = 2.0;          // respiration primary source
  double rotationHz2 = 0.0;         // optional second source
  int maxReflectors = 3;            // random multipath
  // networked scenarios
  int numRrus = 4;
  int numSlots = 50;
  double offsetWalkNs = 2.0;
  double toaNoiseNs = 1.0;
  // pps scenarios
  int ppsCount = 8;
  double ppsSigmaNs = 30.0;
  double skewPpm = 12.0;
  double counterRateHz = 1e8;
};

struct RunConfig {
  uint64_t seed = 1;
  int trials = 1;
  int jobs = 1;
  std::string outDir = "results";
  ScenarioSpec scenario;
  std::vector<MethodSpec> methods;
};

struct TrialResult {
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double estimate = 0.0, truth = 0.0;
  double estimate2 = 0.0, truth2 = 0.0;
  bool hasSecondary = false;
  double scalarError = 0.0;    // the quantity summarized (signed for 1-D estimates)
  double imageToTrue = -1.0;   // < 0 when not applicable
  double trackStd = -1.0;
};

struct MethodSummary {
  std::string method;
  int trials = 0;
  int failures = 0;
  double rmse = 0.0;
  double bias = 0.0;
  double stddev = 0.0;
  double meanImageToTrue = -1.0;
  double meanTrackStd = -1.0;
  std::string annotation;  // sync accuracy constants for gpsta methods
  std::vector<TrialResult> rows;
};

RunConfig parse_config(const std::string& jsonText);
RunConfig load_config(const std::string& path);

// Runs every method over the configured trials and writes one CSV per method
// plus summary.csv into outDir. Deterministic for a given config, including
// across jobs settings.
std::vector<MethodSummary> run_config(const RunConfig& config, const std::string& outDir);

struct RangingDemoRow {
  double ppm = 0.0;
  double intervalMs = 0.0;
  double tmoBoundNs = 0.0;
  double rangeErrorM = 0.0;
  double empiricalMaxDriftNs = 0.0;
};

// TMO drift sweep: clock stability in ppm accumulated over an interval and
// converted to an equivalent ranging error.
std::vector<RangingDemoRow> demo_ranging_ambiguity();
void write_ranging_demo_csv(const std::vector<RangingDemoRow>& rows, const std::string& path);

struct CompareRow {
  std::string method;
  double stddev = 0.0;
  double rmse = 0.0;
  std::string annotation;
};

// Runs the config and ranks methods by estimate spread.
std::vector<CompareRow> compare_methods(const RunConfig& config, const std::string& outDir);
void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);

}  // namespace asense::bench
