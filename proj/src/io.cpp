#include "asense/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

namespace asense::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) throw Error("io: cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io: cannot open for reading: " + path);
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

void write_csi_csv(const CsiTensor& csi, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "n,t,p,q,re,im\n";
  for (int n = 0; n < csi.grid.numSubcarriers; ++n)
    for (int t = 0; t < csi.numBlocks; ++t)
      for (int p = 0; p < csi.grid.numRxAntennas; ++p)
        for (int q = 0; q < csi.grid.numTxAntennas; ++q) {
          const cplx v = csi.at(n, t, p, q);
          out << n << ',' << t << ',' << p << ',' << q << ',' << format_double(v.real())
              << ',' << format_double(v.imag()) << '\n';
        }
}

void write_spectrum_csv(const Spectrum2D& spectrum, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "delay_s\\doppler_hz";
  for (double f : spectrum.dopplerAxisHz) out << ',' << format_double(f);
  out << '\n';
  for (size_t i = 0; i < spectrum.delayAxisS.size(); ++i) {
    out << format_double(spectrum.delayAxisS[i]);
    for (int j = 0; j < spectrum.values.cols(); ++j)
      out << ',' << format_double(spectrum.values(static_cast<int>(i), j));
    out << '\n';
  }
}

void write_timestamps_csv(const std::vector<double>& counters,
                          const std::vector<double>& timestampsS, const std::string& path) {
  if (counters.size() != timestampsS.size())
    throw Error("io: counter/timestamp length mismatch");
  std::ofstream out = open_out(path);
  out << "counter,timestamp_s\n";
  for (size_t i = 0; i < counters.size(); ++i)
    out << format_double(counters[i]) << ',' << format_double(timestampsS[i]) << '\n';
}

std::vector<gpsta::PpsRecord> read_pps_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error("io: empty PPS file: " + path);
  std::vector<gpsta::PpsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw Error("io: malformed PPS row: " + line);
    records.push_back({std::stod(fields[1]), std::stod(fields[0])});
  }
  return records;
}

void write_toa_csv(const net::ToaFrame& frame, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "slot,rru,toa_s\n";
  for (int t = 0; t < frame.numSlots(); ++t)
    for (int i = 0; i < frame.numRrus(); ++i)
      out << t << ',' << i << ',' << format_double(frame.toasS(t, i)) << '\n';
}

net::ToaFrame read_toa_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error("io: empty TOA file: " + path);
  int maxSlot = -1, maxRru = -1;
  std::vector<std::tuple<int, int, double>> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw Error("io: malformed TOA row: " + line);
    const int slot = std::stoi(fields[0]);
    const int rru = std::stoi(fields[1]);
    entries.emplace_back(slot, rru, std::stod(fields[2]));
    maxSlot = std::max(maxSlot, slot);
    maxRru = std::max(maxRru, rru);
  }
  if (maxSlot < 0) throw Error("io: TOA file has no rows: " + path);
  net::ToaFrame frame;
  frame.toasS = Eigen::MatrixXd::Constant(maxSlot + 1, maxRru + 1,
                                          std::numeric_limits<double>::quiet_NaN());
  for (const auto& [slot, rru, toa] : entries) frame.toasS(slot, rru) = toa;
  if (frame.toasS.hasNaN()) throw Error("io: TOA file missing (slot, rru) entries");
  return frame;
}

void write_arc_csv(const casr::RatioSeries& series, const casr::CircleFit& fit,
                   const std::string& path) {
  std::ofstream out = open_out(path);
  out << "t,re,im,center_re,center_im,radius,rms_residual\n";
  for (size_t t = 0; t < series.values.size(); ++t) {
    out << t << ',' << format_double(series.values[t].real()) << ','
        << format_double(series.values[t].imag());
    if (t == 0)
      out << ',' << format_double(fit.center.real()) << ',' << format_double(fit.center.imag())
          << ',' << format_double(fit.radius) << ',' << format_double(fit.rmsResidual);
    else
      out << ",,,,";
    out << '\n';
  }
}

void write_trace_csv(const std::vector<double>& values, const std::string& header,
                     const std::string& path) {
  std::ofstream out = open_out(path);
  out << "iteration," << header << '\n';
  for (size_t i = 0; i < values.size(); ++i)
    out << i << ',' << format_double(values[i]) << '\n';
}

void write_table_csv(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::string& path) {
  std::ofstream out = open_out(path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace asense::io
