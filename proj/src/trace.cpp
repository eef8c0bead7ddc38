#include "vropt/trace.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vropt {

void write_trace_csv(const Trace& trace, std::ostream& out,
                     const std::vector<std::string>& metadata) {
  for (const auto& m : metadata) out << "# " << m << '\n';
  out << "epoch,datapasses,wall_ms,fval,subopt\n";
  char buf[256];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g", r.epoch, r.datapasses,
                  r.wall_ms, r.fval, r.subopt);
    out << buf << '\n';
  }
}

Trace read_trace_csv(std::istream& in) {
  Trace t;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "epoch,datapasses,wall_ms,fval,subopt")
        throw std::runtime_error("read_trace_csv: unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    TraceRecord r{};
    std::istringstream ss(line);
    char comma;
    if (!(ss >> r.epoch >> comma >> r.datapasses >> comma >> r.wall_ms >> comma >> r.fval >>
          comma >> r.subopt))
      throw std::runtime_error("read_trace_csv: malformed row '" + line + "'");
    t.records.push_back(r);
  }
  if (!saw_header) throw std::runtime_error("read_trace_csv: missing header");
  return t;
}

}  // namespace vropt
