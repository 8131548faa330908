#include "asense/bench.hpp"

#include <filesystem>
#include <fstream>

#include "asense/estimators.hpp"
#include "asense/io.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace asense;
using namespace asense::bench;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool dirs_equal(const std::string& a, const std::string& b) {
  std::vector<std::filesystem::path> filesA;
  for (const auto& e : std::filesystem::directory_iterator(a)) filesA.push_back(e.path());
  std::sort(filesA.begin(), filesA.end());
  for (const auto& pa : filesA) {
    const std::filesystem::path pb = std::filesystem::path(b) / pa.filename();
    if (!std::filesystem::exists(pb)) return false;
    if (slurp(pa) != slurp(pb)) return false;
  }
  return filesA.size() ==
         static_cast<size_t>(std::distance(std::filesystem::directory_iterator(b),
                                           std::filesystem::directory_iterator{}));
}

const char* kSmallConfig = R"({
  "seed": 11,
  "trials": 4,
  "scenario": {"kind": "los_dynamic", "snrDb": 20},
  "methods": [{"name": "cacc.plain"}, {"name": "cacc.addminus"}]
})";

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("config parsing accepts a valid config and applies defaults") {
  const RunConfig cfg = parse_config(kSmallConfig);
  CHECK(cfg.seed == 11);
  CHECK(cfg.trials == 4);
  CHECK(cfg.scenario.kind == ScenarioKind::LosDynamic);
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.scenario.snrDb.has_value());
}

TEST_CASE("config errors name the offending field") {
  auto expectError = [](const std::string& text, const std::string& needle) {
    try {
      parse_config(text);
      FAIL_CHECK("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expectError(R"({"scenario": {"kind": "los_dynamic"}, "methods": [{"name": "no.such"}]})",
              "no.such");
  expectError(R"({"scenario": {"kind": "warp"}, "methods": [{"name": "cacc.plain"}]})", "warp");
  expectError(R"({"scenario": {"kind": "los_dynamic"}, "methods": []})", "methods");
  expectError(R"({"methods": [{"name": "cacc.plain"}]})", "scenario");
  expectError(R"({"bogus": 1, "scenario": {"kind": "los_dynamic"}, "methods": [{"name": "cacc.plain"}]})",
              "bogus");
  expectError(R"({"trials": 0, "scenario": {"kind": "los_dynamic"}, "methods": [{"name": "cacc.plain"}]})",
              "trials");
  expectError(R"({"scenario": {"kind": "pps"}, "methods": [{"name": "cacc.plain"}]})",
              "does not apply");
  expectError("{]", "invalid JSON");
}

TEST_CASE("identical configs produce byte-identical outputs, whatever the job count") {
  const std::filesystem::path base = std::filesystem::temp_directory_path() / "asense_bench";
  std::filesystem::remove_all(base);
  RunConfig cfg = parse_config(kSmallConfig);

  run_config(cfg, (base / "a").string());
  run_config(cfg, (base / "b").string());
  CHECK(dirs_equal((base / "a").string(), (base / "b").string()));

  cfg.jobs = 3;
  run_config(cfg, (base / "c").string());
  CHECK(dirs_equal((base / "a").string(), (base / "c").string()));
  std::filesystem::remove_all(base);
}

TEST_CASE("per-trial failures are recorded without aborting the run") {
  // linearized casr needs the respiration scenario's static reference, so on
  // los_dynamic every trial fails while the other method still reports
  const RunConfig cfg = parse_config(R"({
    "seed": 2, "trials": 3,
    "scenario": {"kind": "los_dynamic", "snrDb": 25},
    "methods": [{"name": "casr.linearized"}, {"name": "cacc.addminus"}]
  })");
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "asense_fail";
  std::filesystem::remove_all(out);
  const auto summaries = run_config(cfg, out.string());
  REQUIRE(summaries.size() == 2);
  CHECK(summaries[0].failures == 3);
  CHECK(summaries[1].failures == 0);
  const std::string rows = slurp(out / "casr.linearized.csv");
  CHECK(rows.find("error:") != std::string::npos);
  std::filesystem::remove_all(out);
}

TEST_CASE("ranging demo reproduces the ppm-to-meters table") {
  const auto rows = demo_ranging_ambiguity();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rangeErrorM == doctest::Approx(0.0));
  CHECK(rows[1].rangeErrorM == doctest::Approx(3.0).epsilon(0.02));
  CHECK(rows[2].rangeErrorM == doctest::Approx(6.0).epsilon(0.02));
  for (const auto& r : rows) CHECK(r.empiricalMaxDriftNs <= r.tmoBoundNs);
}

TEST_CASE("compare ranks methods and annotates sync rows") {
  const RunConfig cfg = parse_config(R"({
    "seed": 5, "trials": 40,
    "scenario": {"kind": "pps", "ppsCount": 8, "ppsSigmaNs": 30},
    "methods": [{"name": "gpsta.twopoint"}, {"name": "gpsta.multipoint"}]
  })");
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "asense_cmp";
  std::filesystem::remove_all(out);
  const auto rows = compare_methods(cfg, out.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "gpsta.multipoint");  // more anchors, less spread
  CHECK(rows[0].annotation.find("42") != std::string::npos);
  std::filesystem::remove_all(out);
}

TEST_CASE("single-method compare yields a one-row table") {
  const RunConfig cfg = parse_config(R"({
    "seed": 5, "trials": 5,
    "scenario": {"kind": "pps"},
    "methods": [{"name": "gpsta.multipoint"}]
  })");
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "asense_cmp1";
  std::filesystem::remove_all(out);
  CHECK(compare_methods(cfg, out.string()).size() == 1);
  std::filesystem::remove_all(out);
}

TEST_CASE("csv interfaces round-trip their payloads") {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "asense_io";
  std::filesystem::create_directories(dir);

  // toa frames
  net::ToaFrame frame;
  frame.toasS.resize(3, 2);
  frame.toasS << 1.25e-7, 2.5e-7, 3e-7, 4e-7, 5e-7, 6.125e-7;
  io::write_toa_csv(frame, (dir / "toa.csv").string());
  const net::ToaFrame back = io::read_toa_csv((dir / "toa.csv").string());
  CHECK((back.toasS - frame.toasS).cwiseAbs().maxCoeff() == 0.0);

  // counter/timestamp pairs come back as pps records
  io::write_timestamps_csv({10.0, 1e8 + 10.0, 2e8 + 10.0}, {100.0, 101.0, 102.0},
                           (dir / "pps.csv").string());
  const auto records = io::read_pps_csv((dir / "pps.csv").string());
  REQUIRE(records.size() == 3);
  CHECK(records[1].gpsTimeS == doctest::Approx(101.0));
  CHECK(records[1].counterTicks == doctest::Approx(1e8 + 10.0));

  // tensor and spectrum exports carry the documented headers
  const auto scene = asense::testing::los_dynamic_scene(10.0, 5.0, 100e-9, 1, 4, 2);
  const CsiTensor csi =
      synthesize_csi(scene.paths, scene.grid, asense::testing::zero_trace(4), 4);
  io::write_csi_csv(csi, (dir / "csi.csv").string());
  std::ifstream csiIn(dir / "csi.csv");
  std::string header;
  std::getline(csiIn, header);
  CHECK(header == "n,t,p,q,re,im");

  const Spectrum2D spec = periodogram_2d(csi.slice(0, 0), scene.grid, 2);
  io::write_spectrum_csv(spec, (dir / "spec.csv").string());
  CHECK(std::filesystem::file_size(dir / "spec.csv") > 100);

  io::write_trace_csv({-10.0, -5.0, -4.9}, "loglik", (dir / "trace.csv").string());
  std::ifstream traceIn(dir / "trace.csv");
  std::getline(traceIn, header);
  CHECK(header == "iteration,loglik");

  casr::RatioSeries arcSeries;
  arcSeries.values = {cplx(1, 0), cplx(0, 1), cplx(-1, 0)};
  casr::CircleFit arcFit;
  arcFit.radius = 1.0;
  io::write_arc_csv(arcSeries, arcFit, (dir / "arc.csv").string());
  std::ifstream arcIn(dir / "arc.csv");
  std::getline(arcIn, header);
  CHECK(header == "t,re,im,center_re,center_im,radius,rms_residual");

  std::filesystem::remove_all(dir);
}

TEST_CASE("toa scenario methods produce position rows") {
  const RunConfig cfg = parse_config(R"({
    "seed": 9, "trials": 3,
    "scenario": {"kind": "toa_static", "numRrus": 4, "numSlots": 30},
    "methods": [{"name": "net.toa"}, {"name": "net.em"}, {"name": "net.tdoa"},
                {"name": "net.aoa", "aoaNoiseRad": 0.001}]
  })");
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "asense_toa";
  std::filesystem::remove_all(out);
  const auto summaries = run_config(cfg, out.string());
  for (const auto& s : summaries) {
    CHECK(s.failures == 0);
    CHECK(s.rmse < 5.0);
  }
  std::filesystem::remove_all(out);
}

}  // TEST_SUITE
