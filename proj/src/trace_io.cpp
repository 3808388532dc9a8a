#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "shipems/error.hpp"
#include "shipems/mission.hpp"

namespace shipems {

namespace {

void put_number(std::string& out, double v) {
  // Keeps "-0.000000" out of the trace.
  if (std::abs(v) < 5e-7) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f,", v);
  out += buf;
}

double to_double(const std::string& cell, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ParseError,
                "trace line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
}

}  // namespace

std::string trace_header(std::size_t generator_count) {
  std::string h = "t";
  for (std::size_t i = 1; i <= generator_count; ++i) h += ",p_gen" + std::to_string(i);
  h += ",p_es_bus,e_es,soc_pct,p_pr,p_ppl";
  for (std::size_t i = 1; i <= generator_count; ++i) h += ",i_gen" + std::to_string(i);
  h += ",i_es,i_pr,i_ppl,mode,flags";
  return h;
}

std::string format_trace_row(const TelemetryFrame& f) {
  std::string row;
  row.reserve(160);
  put_number(row, f.t);
  for (double p : f.p_gen) put_number(row, p);
  put_number(row, f.p_es_bus);
  put_number(row, f.e_es);
  put_number(row, f.soc_pct);
  put_number(row, f.p_pr);
  put_number(row, f.p_ppl);
  for (double i : f.i_gen) put_number(row, i);
  put_number(row, f.i_es);
  put_number(row, f.i_pr);
  put_number(row, f.i_ppl);
  row += to_string(f.mode);
  row += ',';
  row += f.flags.tokens();
  return row;
}

void write_trace(std::span<const TelemetryFrame> trace, std::ostream& out,
                 std::size_t generator_count) {
  out << trace_header(generator_count) << '\n';
  for (const auto& f : trace) out << format_trace_row(f) << '\n';
}

void write_trace(std::span<const TelemetryFrame> trace, const std::filesystem::path& path,
                 std::size_t generator_count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  write_trace(trace, out, generator_count);
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write to " + path.string() + " failed");
}

std::vector<TelemetryFrame> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "trace has no header");
  std::vector<std::string> columns;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) columns.push_back(c);
  }
  // t, n p_gen, 5 scalars, n i_gen, 3 currents, mode, flags
  if (columns.size() < 13 || (columns.size() - 11) % 2 != 0) {
    throw Error(ErrorKind::ParseError, "unexpected trace header");
  }
  const std::size_t n = (columns.size() - 11) / 2;
  if (line != trace_header(n)) throw Error(ErrorKind::ParseError, "unexpected trace header");

  std::vector<TelemetryFrame> trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != columns.size()) {
      throw Error(ErrorKind::ParseError, "trace line " + std::to_string(line_no) +
                                             ": expected " + std::to_string(columns.size()) +
                                             " cells");
    }
    TelemetryFrame f;
    std::size_t c = 0;
    f.t = to_double(cells[c++], line_no);
    for (std::size_t i = 0; i < n; ++i) f.p_gen.push_back(to_double(cells[c++], line_no));
    f.p_es_bus = to_double(cells[c++], line_no);
    f.e_es = to_double(cells[c++], line_no);
    f.soc_pct = to_double(cells[c++], line_no);
    f.p_pr = to_double(cells[c++], line_no);
    f.p_ppl = to_double(cells[c++], line_no);
    for (std::size_t i = 0; i < n; ++i) f.i_gen.push_back(to_double(cells[c++], line_no));
    f.i_es = to_double(cells[c++], line_no);
    f.i_pr = to_double(cells[c++], line_no);
    f.i_ppl = to_double(cells[c++], line_no);
    const auto mode = parse_dispatch_mode(cells[c++]);
    if (!mode) throw Error(ErrorKind::ParseError, "trace line " + std::to_string(line_no) + ": bad mode");
    f.mode = *mode;
    f.flags = PlantFlags::from_tokens(cells[c++]);
    f.step = static_cast<std::int64_t>(trace.size());
    trace.push_back(std::move(f));
  }
  return trace;
}

}  // namespace shipems
