#pragma once

// Auto-decoder: an MLP mapping (latent code, query point) to a signed
// distance, trained jointly with one latent code per training shape.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lf/geometry.hpp"
#include "lf/meshops.hpp"
#include "lf/trainset.hpp"

namespace lf::nsdf {

struct DecoderConfig {
  int latent_dim = 8;
  int hidden_layers = 8;
  int hidden_width = 256;
  double clamp_delta = 0.1;
  /// Negative selects the default 1e-4 / latent_dim.
  double latent_reg_weight = -1.0;

  double reg_weight() const { return latent_reg_weight < 0 ? 1e-4 / latent_dim : latent_reg_weight; }
  void validate() const;
};

/// Network parameters plus the per-shape latent code table.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (out x in, column-major) followed by the bias vector. Hidden layers use
/// ReLU, the single output neuron tanh.
class DecoderModel {
 public:
  DecoderModel() = default;
  /// All parameters and codes zero.
  DecoderModel(const DecoderConfig& cfg, std::vector<std::string> shape_ids);

  /// Hidden-layer weights ~ N(0, 2/fan_in), output weights ~ N(0, 1e-4/fan_in),
  /// biases 0, latent codes ~ N(0, 0.01^2).
  void initialize(std::uint64_t seed);

  int latent_dim() const { return latent_dim_; }
  int input_dim() const { return latent_dim_ + 3; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  /// Offsets of layer k's weights and biases inside params().
  std::size_t weight_offset(int k) const { return offsets_[k]; }
  std::size_t bias_offset(int k) const { return offsets_[k] + static_cast<std::size_t>(sizes_[k + 1]) * sizes_[k]; }

  Eigen::Map<const Eigen::MatrixXd> weights(int k) const {
    return {params_.data() + weight_offset(k), sizes_[k + 1], sizes_[k]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int k) const { return {params_.data() + bias_offset(k), sizes_[k + 1]}; }

  Eigen::MatrixXd& codes() { return codes_; }
  const Eigen::MatrixXd& codes() const { return codes_; }
  const std::vector<std::string>& shape_ids() const { return ids_; }
  std::size_t shape_count() const { return ids_.size(); }
  /// Throws std::out_of_range for unknown ids.
  int code_index(const std::string& id) const;
  Eigen::VectorXd code(const std::string& id) const { return codes_.col(code_index(id)); }

  /// Layer-wise names used in error messages ("layer2.weight", ...).
  std::string param_name(std::size_t flat_index) const;

  bool operator==(const DecoderModel& other) const;

 private:
  void build_layout(const std::vector<int>& sizes);

  int latent_dim_ = 0;
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  Eigen::MatrixXd codes_;
  std::vector<std::string> ids_;
};

class DegenerateLatentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single forward pass; throws std::invalid_argument when dim(z) != latent_dim.
double decode(const DecoderModel& model, std::span<const double> z, const Vec3& x);

/// Forward pass over the columns of `inputs` (input_dim x B). The OpenMP
/// kernel runs blocked matrix products over fixed column chunks; the serial
/// reference is a plain per-sample loop kept for testing.
void decode_batch(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<double> out);
void decode_batch_serial(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<double> out);

/// Decode one latent code at every node of `grid`.
void decode_grid(const DecoderModel& model, std::span<const double> z, SdfGrid& grid);

/// |clamp(pred, +-delta) - clamp(truth, +-delta)|
double clamped_l1(double pred, double truth, double delta);

/// eps0 * 0.5^floor(epoch / interval)
double lr_schedule(double eps0, long epoch, long interval = 500);

/// Gradients of a scalar batch objective with respect to the parameters and
/// to every input column.
struct BatchGradients {
  std::vector<double> params;
  Eigen::MatrixXd inputs;
};

/// Backpropagate upstream dL/d(output_b) through the network. The OpenMP
/// kernel reduces fixed-size chunk gradients in chunk order, so results do
/// not depend on the thread count. The serial reference walks one sample at
/// a time with scalar loops.
BatchGradients backward(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<const double> upstream);
BatchGradients backward_serial(const DecoderModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const double> upstream);

struct BatchLoss {
  double mean_l1 = 0.0;  // mean clamped-L1 over the batch
  BatchGradients grads;  // of mean_l1
};

/// Mean clamped-L1 loss of a batch and its gradients.
BatchLoss loss_and_gradients(const DecoderModel& model, const Eigen::MatrixXd& inputs,
                             std::span<const double> targets, double delta);

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool operator==(const ParamBlock&) const = default;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<ParamBlock> blocks;  // optional names for error reporting

  explicit AdamState(std::size_t n = 0, std::vector<ParamBlock> names = {})
      : m(n, 0.0), v(n, 0.0), blocks(std::move(names)) {}
  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected ADAM update with learning rate lr. Throws on shape
/// mismatch or a non-finite gradient (naming the parameter block).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// Flat sample storage for training: all shapes' samples concatenated.
struct TrainingData {
  std::vector<std::string> shape_ids;
  std::vector<std::uint32_t> shape_of;  // per sample
  std::vector<Vec3> points;
  std::vector<double> distances;

  std::size_t size() const { return points.size(); }
  void add(const SdfSampleSet& set);
};

/// Load every record's sample file; errors name the offending file.
TrainingData load_training_data(const trainset::CorpusManifest& manifest);

struct TrainConfig {
  int epochs = 1000;
  int batch = 4096;
  int batches_per_epoch = 4;
  double lr_theta = 5e-4;
  double lr_codes = 1e-3;
  long decay_interval = 500;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr_theta = 0.0;
  double lr_codes = 0.0;
  double mean_loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
};

struct TrainResult {
  DecoderModel model;
  TrainHistory history;
};

/// Joint optimization of network weights and latent codes with separate ADAM
/// states and step-decay schedules. Deterministic for a fixed seed.
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainResult train(const TrainingData& data, const DecoderConfig& dcfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch = {});
TrainResult train(const trainset::CorpusManifest& manifest, const DecoderConfig& dcfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch = {});

/// Decode on a resolution^3 grid over [-1, 1]^3, extract the zero level set,
/// keep the largest connected component, and optionally rescale to
/// target_volume. The outermost grid layer is forced positive so the
/// surface is always closed. Throws DegenerateLatentError when empty.
TriMesh reconstruct(const DecoderModel& model, std::span<const double> z, int resolution,
                    std::optional<double> target_volume = std::nullopt);

// Model file: "ADEC", u32 latent_dim, u32 layer count + 1, u32 layer sizes,
// f64 weights/biases in layer order, u64 code count, then (id, l x f64) per code.
void save_model(const DecoderModel& model, const std::filesystem::path& path);
DecoderModel load_model(const std::filesystem::path& path);

/// CSV with header "epoch,lr_theta,lr_z,mean_loss".
void save_history(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace lf::nsdf
