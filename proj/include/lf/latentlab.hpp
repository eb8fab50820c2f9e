#pragma once

// Latent-space utilities: interpolation, shape arithmetic and a t-SNE
// embedding for cluster inspection.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lf/geometry.hpp"

namespace lf::latent {

/// z_a + (z_b - z_a) / (N + 1) * n for 0 <= n <= N + 1. The endpoints are
/// returned as exact copies.
Eigen::VectorXd interpolate(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int N, int n);

/// z_deformed - z_base + z_target
Eigen::VectorXd arithmetic(const Eigen::VectorXd& z_deformed, const Eigen::VectorXd& z_base,
                           const Eigen::VectorXd& z_target);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iters = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum = 0.5;        // before exaggeration ends
  double final_momentum = 0.8;  // after
  std::uint64_t seed = 1;

  void validate() const;
};

/// min(30, n / 4), but at least 1.
double default_perplexity(std::size_t n);

/// Row-conditional Gaussian affinities p_{j|i} (rows sum to 1, zero diagonal)
/// with per-row precision beta_i = 1 / (2 sigma_i^2) chosen by bisection so
/// the row entropy (natural log) matches log(perplexity).
struct ConditionalAffinities {
  Eigen::MatrixXd P;
  std::vector<double> beta;
  std::vector<double> entropy;
};

/// points: one point per row.
ConditionalAffinities conditional_affinities(const Eigen::MatrixXd& points, double perplexity);
ConditionalAffinities conditional_affinities_serial(const Eigen::MatrixXd& points, double perplexity);

/// (P + P^T) / (2n)
Eigen::MatrixXd joint_affinities(const ConditionalAffinities& cond);

/// KL(P || Q) for the Student-t affinities Q of the 2D layout Y (n x 2).
double kl_divergence(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y);

struct Embedding2D {
  std::vector<Vec2> points;
  std::vector<std::string> labels;
  std::vector<double> kl;   // per iteration, against the unexaggerated P
  std::size_t jittered = 0; // duplicate input points perturbed before embedding
};

/// Exact t-SNE. Throws std::invalid_argument for fewer than 3 distinct
/// points or perplexity >= point count.
Embedding2D tsne_embed(const Eigen::MatrixXd& points, std::vector<std::string> labels, const TsneConfig& cfg);

/// Base-shape tag of a corpus id ("hexagon-twist_top-0.4" -> "hexagon").
std::string base_label(const std::string& shape_id);

/// CSV "id,base_label,x,y" plus a gnuplot script next to it (same stem, .gp).
void write_embedding(const Embedding2D& emb, const std::vector<std::string>& ids, const std::filesystem::path& csv);

}  // namespace lf::latent
