#include "riskbn/error.hpp"

namespace riskbn {

namespace {

std::string summarize(const std::vector<RowDiagnostic>& rows) {
  std::string out = std::to_string(rows.size()) + " invalid record(s)";
  for (const auto& r : rows) {
    out += "\n  row " + std::to_string(r.row);
    if (!r.record_id.empty()) out += " (id " + r.record_id + ")";
    out += ": " + r.message;
  }
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

ValidationError::ValidationError(std::vector<RowDiagnostic> rows)
    : Error(summarize(rows)), rows_(std::move(rows)) {}

}  // namespace riskbn
