#pragma once

// Subcommand implementations shared by the CLI and the tests.

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lf/config.hpp"

namespace lf::pipeline {

namespace fs = std::filesystem;

/// Writes the corpus and out_dir/config.resolved.
trainset::CorpusManifest gen_trainset(const PipelineConfig& cfg, const fs::path& out_dir);

/// Writes the model, <model>.history.csv and <model>.config.resolved.
nsdf::TrainResult train(const fs::path& manifest, const PipelineConfig& cfg, const fs::path& out_model,
                        const nsdf::EpochCallback& on_epoch = {});

inline fs::path history_path(const fs::path& model) { return fs::path(model.string() + ".history.csv"); }

/// "0.1,-0.2,..." or the path of a file whose first line holds that list.
Eigen::VectorXd parse_latent(const std::string& text);

TriMesh reconstruct(const fs::path& model, const Eigen::VectorXd& z, int resolution, std::optional<double> volume,
                    const fs::path& out);

/// One mesh per n in `indices`, named interp_<n>.obj.
std::vector<fs::path> interpolate(const fs::path& model, const std::string& a, const std::string& b, int N,
                                  const std::vector<int>& indices, const fs::path& out_dir, int resolution = 48);

TriMesh arithmetic(const fs::path& model, const std::string& deformed, const std::string& base,
                   const std::string& target, const fs::path& out, int resolution = 48);

latent::Embedding2D tsne(const fs::path& model, const fs::path& out_csv, const latent::TsneConfig& base_cfg = {});

/// Training-code bounding box, each side widened by `inflation` times its
/// range (split evenly on both ends).
opt::Bounds latent_bounds(const nsdf::DecoderModel& model, double inflation);

/// Volume of the normalized undeformed square prism.
double reference_volume(const trainset::CorpusConfig& cfg);

/// z -> mesh (rescaled to the reference volume when enabled) -> J.
/// Invalid designs map to +inf.
class LatentObjective {
 public:
  LatentObjective(const nsdf::DecoderModel& model, const PipelineConfig& cfg);

  double operator()(std::span<const double> z) const;
  /// The mesh an evaluation would score, in unit-sphere units.
  TriMesh design(std::span<const double> z) const;
  double reference_volume() const { return volume_; }

  long invalid_designs() const { return invalid_; }
  long stuck_particles() const { return stuck_; }

 private:
  const nsdf::DecoderModel& model_;
  const PipelineConfig& cfg_;
  double volume_ = 0.0;
  mutable std::atomic<long> invalid_{0};
  mutable std::atomic<long> stuck_{0};
};

struct OptimizeOutcome {
  opt::RunReport report;
  double center_J = 0.0;  // objective at the centre of the latent box
  double reference_volume = 0.0;
  std::vector<fs::path> meshes;
  std::vector<double> mesh_J;
};

/// Runs DIRECT or SOGA; writes eval_log.csv, report.txt, config.resolved and
/// the best top_k designs as best_NN_J<value>.obj into out_dir.
OptimizeOutcome optimize(const fs::path& model, const std::string& algo, const PipelineConfig& cfg,
                         const fs::path& out_dir);

}  // namespace lf::pipeline
