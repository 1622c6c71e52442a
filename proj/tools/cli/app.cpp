#include "app.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/parallel.hpp"
#include "pipeline.hpp"
#include "render.hpp"

namespace jointspace::cli {

namespace {

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"gen-cci", "Generate a CLEVR-Change-Iterative scene dataset and retrieval triples"},
      {"embed", "Embed every scene as an image vector and a caption vector"},
      {"align", "Rigidly align caption embeddings onto image embeddings"},
      {"build-graph", "Build the epsilon-neighbourhood graph of the joint embedding"},
      {"label-retrieval", "Compare Euclidean and geodesic kNN label retrieval"},
      {"fit-text", "Fit caption embeddings with the cross-modal ranking loss"},
      {"count-smooth-paths", "Count smooth shortest paths at one threshold"},
      {"sweep", "Count smooth shortest paths across a list of thresholds"},
  };
  return d;
}

int render_command(const std::vector<std::string>& files, const std::string& format,
                   const std::string& kind, const std::string& out_file, std::ostream& out,
                   std::ostream& err) {
  try {
    std::vector<std::string> texts;
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      if (!in) {
        err << "error [RuntimeError]: cannot read report '" << f << "'\n";
        return kExitRuntime;
      }
      std::ostringstream s;
      s << in.rdbuf();
      texts.push_back(s.str());
    }
    std::optional<ReportKind> k;
    if (kind == "label") k = ReportKind::Label;
    if (kind == "paths") k = ReportKind::Paths;
    const auto table =
        render_reports(texts, format == "json" ? TableFormat::Json : TableFormat::Csv, k);
    if (out_file.empty()) {
      out << table;
    } else {
      std::ofstream(out_file, std::ios::binary | std::ios::trunc) << table;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error [" << e.name() << "]: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint image/text embedding experiments on manifold graphs", "jointspace"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunOptions options;
  options.threads = hardware_threads();
  std::string out_dir;

  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, descriptions().at(name));
    sub->add_option("-c,--config", options.config, "Experiment config (YAML)")->required();
    sub->add_option("-o,--out", out_dir,
                    "Output directory; overrides JOINTSPACE_OUT_DIR and output.dir");
    sub->add_option("-j,--threads", options.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  std::vector<std::string> report_files;
  std::string format = "csv";
  std::string kind;
  std::string render_out;
  auto* render = app.add_subcommand("render", "Render report.json files as one CSV/JSON table");
  render->add_option("reports", report_files, "report.json files");
  render->add_option("-f,--format", format, "Table format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  render->add_option("-k,--kind", kind, "Table kind when no reports are given")
      ->check(CLI::IsMember({"label", "paths"}));
  render->add_option("-o,--out", render_out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (render->parsed()) return render_command(report_files, format, kind, render_out, out, err);
  const auto* chosen = app.get_subcommands().front();
  if (!out_dir.empty()) options.out = out_dir;
  return run(chosen->get_name(), options, out, err);
}

}  // namespace jointspace::cli
