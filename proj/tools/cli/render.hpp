#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jointspace/label_retrieval.hpp"
#include "jointspace/smoothness.hpp"

namespace jointspace::cli {

enum class ReportKind { Label, Paths };
enum class TableFormat { Csv, Json };

// Inverse of report_to_json / path_report_to_json. Throw SchemaMismatch.
std::vector<RetrievalReport> parse_label_report(std::string_view json);
std::vector<PathCountReport> parse_path_report(std::string_view json);
ReportKind report_kind(std::string_view json);

// Concatenates the rows of several reports of one kind into a single table.
// With no reports the table is header-only; `kind` picks the header and
// defaults to Label.
std::string render_reports(const std::vector<std::string>& report_texts, TableFormat format,
                           std::optional<ReportKind> kind = std::nullopt);

}  // namespace jointspace::cli
