#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "asense/bench.hpp"
#include "asense/io.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void apply_overrides(asense::bench::RunConfig& cfg, const std::string& outDir, int64_t seed,
                     int trials, int jobs) {
  if (!outDir.empty()) cfg.outDir = outDir;
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  if (trials > 0) cfg.trials = trials;
  if (jobs > 0) cfg.jobs = jobs;
}

void print_summaries(const std::vector<asense::bench::MethodSummary>& summaries,
                     double elapsedS) {
  for (const auto& s : summaries) {
    std::cout << s.method << ": trials=" << s.trials << " failures=" << s.failures
              << " rmse=" << asense::io::format_double(s.rmse)
              << " std=" << asense::io::format_double(s.stddev);
    if (s.meanTrackStd >= 0)
      std::cout << " track_std=" << asense::io::format_double(s.meanTrackStd);
    if (s.meanImageToTrue >= 0)
      std::cout << " image_to_true=" << asense::io::format_double(s.meanImageToTrue);
    if (!s.annotation.empty()) std::cout << " [" << s.annotation << "]";
    std::cout << "\n";
  }
  std::cout << "wall clock: " << asense::io::format_double(elapsedS) << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and estimation toolkit for clock-asynchronous OFDM sensing"};
  app.require_subcommand(1);
  app.fallthrough();  // allow global options after the subcommand

  std::string outDir;
  int64_t seedOverride = -1;
  int trialsOverride = 0;
  int jobsOverride = 0;
  app.add_option("--out", outDir, "Output directory override");
  app.add_option("--seed", seedOverride, "Base seed override");
  app.add_option("--trials", trialsOverride, "Trial count override");
  app.add_option("--jobs", jobsOverride, "Worker count (outputs are identical for any value)");

  std::string runConfigPath;
  CLI::App* run = app.add_subcommand("run", "Run all configured methods and write CSV reports");
  run->add_option("config", runConfigPath, "JSON config file")->required();

  std::string compareConfigPath;
  CLI::App* compare =
      app.add_subcommand("compare", "Run methods on a shared scenario and rank by spread");
  compare->add_option("config", compareConfigPath, "JSON config file")->required();

  CLI::App* demo = app.add_subcommand("demo", "Built-in demonstrations");
  std::string demoName;
  demo->add_option("name", demoName, "Demo name (ranging)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      asense::bench::RunConfig cfg = asense::bench::load_config(runConfigPath);
      apply_overrides(cfg, outDir, seedOverride, trialsOverride, jobsOverride);
      const auto start = std::chrono::steady_clock::now();
      const auto summaries = asense::bench::run_config(cfg, cfg.outDir);
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      print_summaries(summaries, elapsed);
      std::cout << "reports written to " << cfg.outDir << "\n";
    } else if (compare->parsed()) {
      asense::bench::RunConfig cfg = asense::bench::load_config(compareConfigPath);
      apply_overrides(cfg, outDir, seedOverride, trialsOverride, jobsOverride);
      if (cfg.methods.size() < 2)
        throw asense::bench::ConfigError("config: compare needs at least two methods");
      const auto rows = asense::bench::compare_methods(cfg, cfg.outDir);
      asense::bench::write_compare_csv(rows, cfg.outDir + "/compare.csv");
      int rank = 1;
      for (const auto& r : rows) {
        std::cout << rank++ << ". " << r.method
                  << " std=" << asense::io::format_double(r.stddev)
                  << " rmse=" << asense::io::format_double(r.rmse);
        if (!r.annotation.empty()) std::cout << " [" << r.annotation << "]";
        std::cout << "\n";
      }
      std::cout << "ranking written to " << cfg.outDir << "/compare.csv\n";
    } else if (demo->parsed()) {
      if (demoName != "ranging")
        throw asense::bench::ConfigError("unknown demo '" + demoName + "' (expected: ranging)");
      const auto rows = asense::bench::demo_ranging_ambiguity();
      const std::string dir = outDir.empty() ? "results" : outDir;
      std::filesystem::create_directories(dir);
      asense::bench::write_ranging_demo_csv(rows, dir + "/ranging_ambiguity.csv");
      for (const auto& r : rows)
        std::cout << r.ppm << " ppm over " << r.intervalMs
                  << " ms -> TMO bound " << asense::io::format_double(r.tmoBoundNs)
                  << " ns -> range error " << asense::io::format_double(r.rangeErrorM)
                  << " m\n";
      std::cout << "table written to " << dir << "/ranging_ambiguity.csv\n";
    }
  } catch (const asense::bench::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
