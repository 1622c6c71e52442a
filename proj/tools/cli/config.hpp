#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointspace/alignment.hpp"
#include "jointspace/label_retrieval.hpp"

namespace jointspace::cli {

// Invalid configuration. `path` names the offending field, e.g.
// "label.k_shot"; empty for file-level problems.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct CciSection {
  std::size_t iterations = 4;
  std::size_t branching = 10;
  std::uint64_t seed = 0;
  std::size_t min_objects = 3;
  std::size_t max_objects = 6;
  std::size_t object_cap = 10;
};

struct EmbedSection {
  std::size_t dim = 32;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  // Rotate caption embeddings by a random rotation, modelling an encoder
  // whose output space is not aligned with the image encoder's.
  bool text_rotation = true;
};

enum class MoveSide { Image, Text };

struct AlignSection {
  AlignMethod method = AlignMethod::Procrustes;
  MoveSide move = MoveSide::Text;
  bool renormalize = true;
};

struct GraphSection {
  std::optional<double> epsilon;
  std::optional<double> target_edge_ratio;
  std::vector<double> thresholds;   // sweep: explicit list
  std::vector<double> edge_ratios;  // sweep: calibrated on the image set
};

struct LabelSection {
  RetrievalProtocol protocol;
};

struct LossSection {
  std::size_t steps = 500;
  double lr = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct SyntheticSection {
  std::string kind = "arcs";
  std::size_t points_per_class = 500;
  std::size_t texts_per_class = 0;
  std::size_t dim = 3;
  double chart_scale = 0.5;
  double noise = 0.02;
  double arm_offset = 0.7;
  double text_jitter = 0.02;
  bool text_rotation = true;
  std::uint64_t seed = 0;
};

struct InputSection {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> images;
  std::optional<std::filesystem::path> texts;
};

struct OutputSection {
  std::filesystem::path dir = "out";
  bool json = true;
  bool csv = true;
  std::size_t paths_limit = 0;  // smooth paths dumped to paths.jsonl
};

struct ExperimentConfig {
  std::optional<CciSection> cci;
  std::optional<EmbedSection> embed;
  std::optional<AlignSection> align;
  std::optional<GraphSection> graph;
  std::optional<LabelSection> label;
  std::optional<LossSection> loss;
  std::optional<SyntheticSection> synthetic;
  InputSection input;
  OutputSection output;

  std::filesystem::path source;  // config file
  std::string text;              // raw bytes, hashed into the manifest
};

// Parses a YAML config. Relative input paths resolve against the config
// file's directory. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

// FNV-1a 64 of the config bytes, as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace jointspace::cli
