#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vropt {

struct TraceRecord {
  int epoch;
  double datapasses;  // cumulative, in gradient-evaluation equivalents / N
  double wall_ms;
  double fval;
  double subopt;  // (F - F*) / (F0 - F*), clamped below at 1e-16
};

struct Trace {
  std::vector<TraceRecord> records;

  bool empty() const { return records.empty(); }
  const TraceRecord& back() const { return records.back(); }
};

/// CSV with header `epoch,datapasses,wall_ms,fval,subopt`, 17 significant
/// digits. Lines starting with '#' are metadata and are skipped on read.
void write_trace_csv(const Trace& trace, std::ostream& out,
                     const std::vector<std::string>& metadata = {});
Trace read_trace_csv(std::istream& in);

}  // namespace vropt
