#pragma once

// Pipeline configuration: flat "section.key = value" text, '#' comments.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lf/latentlab.hpp"
#include "lf/neuralsdf.hpp"
#include "lf/objective.hpp"
#include "lf/optim.hpp"
#include "lf/trainset.hpp"

namespace lf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerSettings {
  opt::Criteria criteria{1000, 1000, 20, 1e-4};
  double direct_epsilon = 1e-4;
  std::size_t pop_size = 50;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  double bounds_inflation = 0.1;  // per-coordinate, relative to the code range
  int resolution = 32;            // marching-cubes grid per evaluation
  bool volume_constraint = true;
  int top_k = 10;
  bool parallel_evaluations = false;
};

struct ObjectiveSettings {
  mix::ChannelSpec channel;
  mix::MixingConfig mixing;
  mix::SurrogateOptions surrogate;
  double element_scale = 0.003;  // unit-sphere mesh -> metres
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  trainset::CorpusConfig trainset;
  nsdf::DecoderConfig decoder;
  nsdf::TrainConfig training;
  OptimizerSettings optimizer;
  ObjectiveSettings objective;
  latent::TsneConfig tsne;

  /// Copy the global seed into every stage and validate.
  void resolve();
};

/// Parse over defaults. Unknown keys, duplicate keys and malformed values
/// throw ConfigError naming the source and line.
PipelineConfig parse_config(std::istream& in, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

/// LF_SEED, when set, replaces the global seed.
void apply_seed_override(PipelineConfig& cfg);

/// Every key with its current value, one per line, preceded by its doc line.
void write_config(const PipelineConfig& cfg, std::ostream& out);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

std::vector<std::string> config_keys();

}  // namespace lf
