#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "duo/metrics.hpp"

namespace duo {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportFormat { Csv, JsonLines };

ReportFormat parse_format(std::string_view text);

/// Column name for a SAC target, e.g. 0.98 -> "sac_98".
std::string sac_column(double target);

/// RFC-4180 field quoting.
std::string csv_field(std::string_view text);

/// Writes rows with a header (CSV) or one object per line (JSON lines).
/// All rows must carry the same SAC targets.
void write_report(std::ostream& out, std::span<const MetricRow> rows, ReportFormat format);

}  // namespace duo
