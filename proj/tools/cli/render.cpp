#include "render.hpp"

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"

namespace jointspace::cli {

namespace {

using Json = nlohmann::ordered_json;

Json parse(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaMismatch("report is not a JSON object");
  return j;
}

Json parse_kind(std::string_view text, const char* kind) {
  Json j = parse(text);
  const auto it = j.find("kind");
  if (it == j.end() || !it->is_string()) throw SchemaMismatch("report has no 'kind'");
  if (*it != kind) {
    throw SchemaMismatch("expected a '" + std::string(kind) + "' report, got '" +
                         it->get<std::string>() + "'");
  }
  if (!j.contains("reports") || !j["reports"].is_array()) {
    throw SchemaMismatch("report has no 'reports' array");
  }
  return j;
}

template <typename T>
T field(const Json& row, const char* key) {
  const auto it = row.find(key);
  if (it == row.end()) throw SchemaMismatch(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw SchemaMismatch(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

ReportKind report_kind(std::string_view json) {
  const Json j = parse(json);
  const auto kind = j.value("kind", std::string());
  if (kind == "label") return ReportKind::Label;
  if (kind == "paths") return ReportKind::Paths;
  throw SchemaMismatch("unknown report kind '" + kind + "'");
}

std::vector<RetrievalReport> parse_label_report(std::string_view json) {
  const Json j = parse_kind(json, "label");
  std::vector<RetrievalReport> out;
  for (const auto& row : j["reports"]) {
    RetrievalReport r;
    r.method = field<std::string>(row, "method");
    r.feature_space = field<std::string>(row, "feature_space");
    r.accuracy = field<double>(row, "accuracy");
    r.retrievable_count = field<std::size_t>(row, "retrievable_count");
    r.unretrievable_count = field<std::size_t>(row, "unretrievable_count");
    r.per_class_accuracy = field<std::map<std::string, double>>(row, "per_class_accuracy");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PathCountReport> parse_path_report(std::string_view json) {
  const Json j = parse_kind(json, "paths");
  if (j.value("log_base", std::string("e")) != "e") throw SchemaMismatch("unsupported log_base");
  std::vector<PathCountReport> out;
  for (const auto& row : j["reports"]) {
    PathCountReport r;
    r.threshold = field<double>(row, "threshold");
    const Json counts = field<Json>(row, "counts");
    if (!counts.is_object()) throw SchemaMismatch("'counts' is not an object");
    for (const auto& [name, c] : counts.items()) {
      SmoothPathCount s;
      s.count = field<std::uint64_t>(c, "count");
      s.reachable_pairs = field<std::uint64_t>(c, "reachable_pairs");
      const auto ln = c.find("ln_count");
      if (ln != c.end() && !ln->is_null()) s.ln_count = ln->get<double>();
      r.variants.push_back(name);
      r.counts.push_back(s);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_reports(const std::vector<std::string>& report_texts, TableFormat format,
                           std::optional<ReportKind> kind) {
  for (const auto& text : report_texts) {
    const auto k = report_kind(text);
    if (kind && *kind != k) throw SchemaMismatch("reports of different kinds cannot share a table");
    kind = k;
  }
  if (kind.value_or(ReportKind::Label) == ReportKind::Label) {
    std::vector<RetrievalReport> rows;
    for (const auto& text : report_texts) {
      auto r = parse_label_report(text);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    return format == TableFormat::Csv ? report_to_csv(rows) : report_to_json(rows);
  }
  std::vector<PathCountReport> rows;
  for (const auto& text : report_texts) {
    auto r = parse_path_report(text);
    for (const auto& row : r) {
      if (!rows.empty() && row.variants != rows.front().variants) {
        throw SchemaMismatch("path reports list different variants");
      }
      rows.push_back(row);
    }
  }
  return format == TableFormat::Csv ? path_report_to_csv(rows) : path_report_to_json(rows);
}

}  // namespace jointspace::cli
