#pragma once

// Rendering of collected benchmark rows.  csv and json carry the same
// thirteen fields row for row — csv for spreadsheets, json for scripts —
// while the table view trades machine-readability for aligned columns and
// humanized times.

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "sac/bench/runner.hpp"

namespace sac::bench {

inline constexpr const char* kCsvHeader =
    "benchmark,n,k,threads,phase,time_ns,affected_readers,reexec_work_units,"
    "tree_nodes,tree_height,su,ws,total";

namespace detail {

inline std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string human_time(uint64_t ns) {
  char buf[40];
  if (ns < 10'000)
    std::snprintf(buf, sizeof buf, "%lluns", static_cast<unsigned long long>(ns));
  else if (ns < 10'000'000)
    std::snprintf(buf, sizeof buf, "%.1fus", static_cast<double>(ns) / 1e3);
  else if (ns < 10'000'000'000ull)
    std::snprintf(buf, sizeof buf, "%.1fms", static_cast<double>(ns) / 1e6);
  else
    std::snprintf(buf, sizeof buf, "%.2fs", static_cast<double>(ns) / 1e9);
  return buf;
}

}  // namespace detail

inline void emit_csv(const std::vector<Row>& rows, std::ostream& os) {
  os << kCsvHeader << "\n";
  for (const Row& r : rows) {
    os << r.benchmark << ',' << r.n << ',' << r.k << ',' << r.threads << ','
       << r.phase << ',' << r.time_ns << ',' << r.affected_readers << ','
       << r.reexec_work_units << ',' << r.tree_nodes << ',' << r.tree_height
       << ',' << detail::fmt4(r.su) << ',' << detail::fmt4(r.ws) << ','
       << detail::fmt4(r.total) << "\n";
  }
}

inline void emit_json(const std::vector<Row>& rows, std::ostream& os) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Row& r : rows) {
    arr.push_back({{"benchmark", r.benchmark},
                   {"n", r.n},
                   {"k", r.k},
                   {"threads", r.threads},
                   {"phase", r.phase},
                   {"time_ns", r.time_ns},
                   {"affected_readers", r.affected_readers},
                   {"reexec_work_units", r.reexec_work_units},
                   {"tree_nodes", r.tree_nodes},
                   {"tree_height", r.tree_height},
                   {"su", r.su},
                   {"ws", r.ws},
                   {"total", r.total}});
  }
  os << arr.dump(2) << "\n";
}

inline void emit_table(const std::vector<Row>& rows, std::ostream& os) {
  os << std::left << std::setw(11) << "benchmark" << std::right << std::setw(10)
     << "n" << std::setw(7) << "k" << std::setw(9) << "threads" << "  "
     << std::left << std::setw(9) << "phase" << std::right << std::setw(10)
     << "time" << std::setw(10) << "R_delta" << std::setw(12) << "work"
     << std::setw(11) << "nodes" << std::setw(8) << "height" << std::setw(10)
     << "SU" << std::setw(12) << "WS" << std::setw(14) << "T" << "\n";
  for (const Row& r : rows) {
    os << std::left << std::setw(11) << r.benchmark << std::right
       << std::setw(10) << r.n << std::setw(7) << r.k << std::setw(9)
       << r.threads << "  " << std::left << std::setw(9) << r.phase
       << std::right << std::setw(10) << detail::human_time(r.time_ns)
       << std::setw(10) << r.affected_readers << std::setw(12)
       << r.reexec_work_units << std::setw(11) << r.tree_nodes << std::setw(8)
       << r.tree_height << std::setw(10) << std::fixed << std::setprecision(2)
       << r.su << std::setw(12) << r.ws << std::setw(14) << r.total << "\n";
  }
}

inline void emit(const std::vector<Row>& rows, Format format,
                 std::ostream& os) {
  switch (format) {
    case Format::kCsv:
      emit_csv(rows, os);
      break;
    case Format::kJson:
      emit_json(rows, os);
      break;
    case Format::kTable:
      emit_table(rows, os);
      break;
  }
}

}  // namespace sac::bench
