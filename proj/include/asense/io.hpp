#pragma once

#include <string>
#include <vector>

#include "asense/cacc.hpp"
#include "asense/casr.hpp"
#include "asense/estimators.hpp"
#include "asense/gps_timestamp.hpp"
#include "asense/networked.hpp"
#include "asense/signal_model.hpp"

namespace asense::io {

// All writers emit '.' decimals, LF line endings and a fixed column order so
// that identical runs produce byte-identical files.
std::string format_double(double v);

void write_csi_csv(const CsiTensor& csi, const std::string& path);

void write_spectrum_csv(const Spectrum2D& spectrum, const std::string& path);

void write_timestamps_csv(const std::vector<double>& counters,
                          const std::vector<double>& timestampsS, const std::string& path);
std::vector<gpsta::PpsRecord> read_pps_csv(const std::string& path);

void write_toa_csv(const net::ToaFrame& frame, const std::string& path);
net::ToaFrame read_toa_csv(const std::string& path);

// Ratio series with its fitted circle, for arc visualization.
void write_arc_csv(const casr::RatioSeries& series, const casr::CircleFit& fit,
                   const std::string& path);

void write_trace_csv(const std::vector<double>& values, const std::string& header,
                     const std::string& path);

// Generic table writer: one header row then data rows.
void write_table_csv(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::string& path);

}  // namespace asense::io
