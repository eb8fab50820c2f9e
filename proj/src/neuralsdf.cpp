#include "lf/neuralsdf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "lf/binio.hpp"

namespace lf::nsdf {

namespace {

// Column chunk for the blocked kernels. Fixed so that reductions happen in
// the same order on any thread count.
constexpr Eigen::Index kChunk = 256;

}  // namespace

void DecoderConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("decoder: latent_dim must be positive");
  if (hidden_layers < 1 || hidden_width < 1) throw std::invalid_argument("decoder: widths must be positive");
  if (!(clamp_delta > 0.0)) throw std::invalid_argument("decoder: clamp delta must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
  if (batch < 1 || batches_per_epoch < 1) throw std::invalid_argument("train: batch sizes must be positive");
  if (!(lr_theta > 0.0) || !(lr_codes > 0.0)) throw std::invalid_argument("train: learning rates must be positive");
  if (decay_interval < 1) throw std::invalid_argument("train: decay interval must be positive");
}

// ---------------------------------------------------------------- model

DecoderModel::DecoderModel(const DecoderConfig& cfg, std::vector<std::string> shape_ids) : ids_(std::move(shape_ids)) {
  cfg.validate();
  latent_dim_ = cfg.latent_dim;
  std::vector<int> sizes{cfg.latent_dim + 3};
  for (int k = 0; k < cfg.hidden_layers; ++k) sizes.push_back(cfg.hidden_width);
  sizes.push_back(1);
  build_layout(sizes);
  codes_ = Eigen::MatrixXd::Zero(latent_dim_, static_cast<Eigen::Index>(ids_.size()));
}

void DecoderModel::build_layout(const std::vector<int>& sizes) {
  sizes_ = sizes;
  offsets_.clear();
  std::size_t offset = 0;
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[k + 1]) * (sizes_[k] + 1);
  }
  params_.assign(offset, 0.0);
}

void DecoderModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < layer_count(); ++k) {
    const bool output = k + 1 == layer_count();
    // Small output weights keep initial predictions inside the clamp band,
    // where the loss has a gradient.
    const double stddev = output ? 0.01 / std::sqrt(sizes_[k]) : std::sqrt(2.0 / sizes_[k]);
    double* w = params_.data() + weight_offset(k);
    const std::size_t n = static_cast<std::size_t>(sizes_[k + 1]) * sizes_[k];
    for (std::size_t i = 0; i < n; ++i) w[i] = stddev * gauss(rng);
    std::fill_n(params_.data() + bias_offset(k), sizes_[k + 1], 0.0);
  }
  for (Eigen::Index i = 0; i < codes_.size(); ++i) codes_.data()[i] = 0.01 * gauss(rng);
}

int DecoderModel::code_index(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw std::out_of_range("model has no latent code for shape '" + id + "'");
  return static_cast<int>(it - ids_.begin());
}

std::string DecoderModel::param_name(std::size_t flat_index) const {
  for (int k = layer_count() - 1; k >= 0; --k) {
    if (flat_index >= bias_offset(k)) return "layer" + std::to_string(k) + ".bias";
    if (flat_index >= weight_offset(k)) return "layer" + std::to_string(k) + ".weight";
  }
  return "param" + std::to_string(flat_index);
}

bool DecoderModel::operator==(const DecoderModel& other) const {
  return latent_dim_ == other.latent_dim_ && sizes_ == other.sizes_ && params_ == other.params_ &&
         ids_ == other.ids_ && codes_.rows() == other.codes_.rows() && codes_.cols() == other.codes_.cols() &&
         codes_ == other.codes_;
}

// ---------------------------------------------------------------- kernels

namespace {

using Activations = std::vector<Eigen::MatrixXd>;

void forward_chunk(const DecoderModel& model, const Eigen::Ref<const Eigen::MatrixXd>& in, Activations& acts) {
  const int layers = model.layer_count();
  acts.resize(layers + 1);
  acts[0] = in;
  for (int k = 0; k < layers; ++k) {
    auto& out = acts[k + 1];
    out.resize(model.layer_sizes()[k + 1], in.cols());
    out.noalias() = model.weights(k) * acts[k];
    out.colwise() += model.bias(k);
    if (k + 1 < layers) {
      out = out.cwiseMax(0.0);
    } else {
      out = out.array().tanh();
    }
  }
}

// Accumulates parameter gradients of chunk into grad (flat layout) and
// writes input gradients into grad_in.
void backward_chunk(const DecoderModel& model, const Activations& acts, const Eigen::Ref<const Eigen::RowVectorXd>& upstream,
                    double* grad, Eigen::Ref<Eigen::MatrixXd> grad_in) {
  const int layers = model.layer_count();
  const auto& sizes = model.layer_sizes();
  const auto& y = acts[layers];
  Eigen::MatrixXd delta = (upstream.array() * (1.0 - y.array().square())).matrix();
  Eigen::MatrixXd prev;
  for (int k = layers - 1; k >= 0; --k) {
    Eigen::Map<Eigen::MatrixXd> gw(grad + model.weight_offset(k), sizes[k + 1], sizes[k]);
    Eigen::Map<Eigen::VectorXd> gb(grad + model.bias_offset(k), sizes[k + 1]);
    gw.noalias() += delta * acts[k].transpose();
    // Reduce into an aligned temporary: Eigen picks scalar or packet paths
    // by the destination's runtime alignment, and the two round differently.
    const Eigen::VectorXd bias_sum = delta.rowwise().sum();
    gb += bias_sum;
    prev.resize(sizes[k], delta.cols());
    prev.noalias() = model.weights(k).transpose() * delta;
    if (k > 0) prev = (acts[k].array() > 0.0).select(prev, 0.0);
    delta.swap(prev);
  }
  grad_in = delta;
}

using UpstreamFn = std::function<double(Eigen::Index column, double output)>;

// Blocked forward + backward over all chunks. outputs receives the network
// output per column.
BatchGradients run_blocked(const DecoderModel& model, const Eigen::MatrixXd& inputs, const UpstreamFn& upstream_of,
                           std::span<double> outputs) {
  const Eigen::Index cols = inputs.cols();
  const Eigen::Index n_chunks = (cols + kChunk - 1) / kChunk;
  const std::size_t n_params = model.param_count();
  std::vector<std::vector<double>> chunk_grads(static_cast<std::size_t>(n_chunks));
  BatchGradients result;
  result.inputs.resize(inputs.rows(), cols);

#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    const Eigen::Index begin = c * kChunk;
    const Eigen::Index width = std::min(kChunk, cols - begin);
    Activations acts;
    forward_chunk(model, inputs.middleCols(begin, width), acts);
    Eigen::RowVectorXd up(width);
    for (Eigen::Index j = 0; j < width; ++j) {
      const double y = acts.back()(0, j);
      outputs[static_cast<std::size_t>(begin + j)] = y;
      up[j] = upstream_of(begin + j, y);
    }
    auto& g = chunk_grads[static_cast<std::size_t>(c)];
    g.assign(n_params, 0.0);
    backward_chunk(model, acts, up, g.data(), result.inputs.middleCols(begin, width));
  }

  result.params.assign(n_params, 0.0);
  for (const auto& g : chunk_grads) {
    for (std::size_t i = 0; i < n_params; ++i) result.params[i] += g[i];
  }
  return result;
}

void check_inputs(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::size_t n) {
  if (inputs.rows() != model.input_dim()) {
    throw std::invalid_argument("decoder input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                std::to_string(model.input_dim()));
  }
  if (static_cast<std::size_t>(inputs.cols()) != n) throw std::invalid_argument("decoder: batch size mismatch");
}

}  // namespace

void decode_batch(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<double> out) {
  check_inputs(model, inputs, out.size());
  const Eigen::Index cols = inputs.cols();
  const Eigen::Index n_chunks = (cols + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    const Eigen::Index begin = c * kChunk;
    const Eigen::Index width = std::min(kChunk, cols - begin);
    Activations acts;
    forward_chunk(model, inputs.middleCols(begin, width), acts);
    for (Eigen::Index j = 0; j < width; ++j) out[static_cast<std::size_t>(begin + j)] = acts.back()(0, j);
  }
}

void decode_batch_serial(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<double> out) {
  check_inputs(model, inputs, out.size());
  const auto& sizes = model.layer_sizes();
  const auto params = model.params();
  for (Eigen::Index col = 0; col < inputs.cols(); ++col) {
    std::vector<double> a(inputs.col(col).data(), inputs.col(col).data() + inputs.rows());
    for (int k = 0; k < model.layer_count(); ++k) {
      const int n_in = sizes[k], n_out = sizes[k + 1];
      std::vector<double> z(n_out);
      for (int o = 0; o < n_out; ++o) {
        double s = params[model.bias_offset(k) + o];
        for (int i = 0; i < n_in; ++i) s += params[model.weight_offset(k) + static_cast<std::size_t>(i) * n_out + o] * a[i];
        z[o] = k + 1 < model.layer_count() ? std::max(s, 0.0) : std::tanh(s);
      }
      a = std::move(z);
    }
    out[static_cast<std::size_t>(col)] = a[0];
  }
}

double decode(const DecoderModel& model, std::span<const double> z, const Vec3& x) {
  if (static_cast<int>(z.size()) != model.latent_dim()) {
    throw std::invalid_argument("latent code has dimension " + std::to_string(z.size()) + ", model expects " +
                                std::to_string(model.latent_dim()));
  }
  Eigen::MatrixXd in(model.input_dim(), 1);
  for (int i = 0; i < model.latent_dim(); ++i) in(i, 0) = z[i];
  in.block(model.latent_dim(), 0, 3, 1) = x;
  double out = 0.0;
  decode_batch(model, in, std::span<double>(&out, 1));
  return out;
}

void decode_grid(const DecoderModel& model, std::span<const double> z, SdfGrid& grid) {
  if (static_cast<int>(z.size()) != model.latent_dim()) {
    throw std::invalid_argument("latent code dimension does not match the model");
  }
  grid.validate();
  const std::size_t n = grid.node_count();
  constexpr std::size_t kBlock = 1 << 15;
  Eigen::MatrixXd in(model.input_dim(), static_cast<Eigen::Index>(std::min(n, kBlock)));
  for (std::size_t begin = 0; begin < n; begin += kBlock) {
    const std::size_t width = std::min(kBlock, n - begin);
    in.resize(model.input_dim(), static_cast<Eigen::Index>(width));
    for (std::size_t j = 0; j < width; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      for (int i = 0; i < model.latent_dim(); ++i) in(i, col) = z[i];
      in.block(model.latent_dim(), col, 3, 1) = grid.node(begin + j);
    }
    decode_batch(model, in, std::span<double>(grid.values.data() + begin, width));
  }
}

BatchGradients backward(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<const double> upstream) {
  check_inputs(model, inputs, upstream.size());
  std::vector<double> outputs(upstream.size());
  return run_blocked(
      model, inputs, [&](Eigen::Index col, double) { return upstream[static_cast<std::size_t>(col)]; }, outputs);
}

BatchGradients backward_serial(const DecoderModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const double> upstream) {
  check_inputs(model, inputs, upstream.size());
  const auto& sizes = model.layer_sizes();
  const auto params = model.params();
  const int layers = model.layer_count();
  BatchGradients g;
  g.params.assign(model.param_count(), 0.0);
  g.inputs.resize(inputs.rows(), inputs.cols());
  for (Eigen::Index col = 0; col < inputs.cols(); ++col) {
    // acts[k] is the input of layer k.
    std::vector<std::vector<double>> acts(layers + 1);
    acts[0].assign(inputs.col(col).data(), inputs.col(col).data() + inputs.rows());
    for (int k = 0; k < layers; ++k) {
      acts[k + 1].assign(sizes[k + 1], 0.0);
      for (int o = 0; o < sizes[k + 1]; ++o) {
        double s = params[model.bias_offset(k) + o];
        for (int i = 0; i < sizes[k]; ++i) s += params[model.weight_offset(k) + static_cast<std::size_t>(i) * sizes[k + 1] + o] * acts[k][i];
        acts[k + 1][o] = k + 1 < layers ? std::max(s, 0.0) : std::tanh(s);
      }
    }
    const double y = acts[layers][0];
    std::vector<double> delta{upstream[static_cast<std::size_t>(col)] * (1.0 - y * y)};
    for (int k = layers - 1; k >= 0; --k) {
      std::vector<double> prev(sizes[k], 0.0);
      for (int o = 0; o < sizes[k + 1]; ++o) {
        g.params[model.bias_offset(k) + o] += delta[o];
        for (int i = 0; i < sizes[k]; ++i) {
          const std::size_t w = model.weight_offset(k) + static_cast<std::size_t>(i) * sizes[k + 1] + o;
          g.params[w] += delta[o] * acts[k][i];
          prev[i] += params[w] * delta[o];
        }
      }
      if (k > 0) {
        for (int i = 0; i < sizes[k]; ++i) {
          if (!(acts[k][i] > 0.0)) prev[i] = 0.0;
        }
      }
      delta = std::move(prev);
    }
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) g.inputs(i, col) = delta[static_cast<std::size_t>(i)];
  }
  return g;
}

double clamped_l1(double pred, double truth, double delta) {
  return std::abs(std::clamp(pred, -delta, delta) - std::clamp(truth, -delta, delta));
}

double lr_schedule(double eps0, long epoch, long interval) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  return eps0 * std::pow(0.5, static_cast<double>(epoch / interval));
}

BatchLoss loss_and_gradients(const DecoderModel& model, const Eigen::MatrixXd& inputs, std::span<const double> targets,
                             double delta) {
  check_inputs(model, inputs, targets.size());
  const auto n = static_cast<double>(targets.size());
  std::vector<double> outputs(targets.size());
  BatchLoss result;
  result.grads = run_blocked(
      model, inputs,
      [&](Eigen::Index col, double y) {
        // d/dy |clamp(y) - clamp(t)|: zero where y is clamped.
        if (!(std::abs(y) < delta)) return 0.0;
        const double diff = y - std::clamp(targets[static_cast<std::size_t>(col)], -delta, delta);
        return (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / n;
      },
      outputs);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) sum += clamped_l1(outputs[i], targets[i], delta);
  result.mean_l1 = sum / n;
  return result;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      std::string where = "parameter " + std::to_string(i);
      for (const auto& b : state.blocks) {
        if (i >= b.offset && i < b.offset + b.size) where = b.name;
      }
      throw std::domain_error("adam_step: non-finite gradient in " + where);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

// ---------------------------------------------------------------- training

void TrainingData::add(const SdfSampleSet& set) {
  const auto shape = static_cast<std::uint32_t>(shape_ids.size());
  shape_ids.push_back(set.shape_id);
  for (const auto& s : set.samples) {
    shape_of.push_back(shape);
    points.push_back(s.point);
    distances.push_back(s.distance);
  }
}

TrainingData load_training_data(const trainset::CorpusManifest& manifest) {
  TrainingData data;
  for (const auto& r : manifest.records) {
    auto set = read_samples(manifest.sdf_file(r));
    if (set.samples.empty()) throw std::runtime_error("sample file " + manifest.sdf_file(r).string() + " is empty");
    set.shape_id = r.id;
    data.add(set);
  }
  return data;
}

namespace {

std::vector<ParamBlock> param_blocks(const DecoderModel& model) {
  std::vector<ParamBlock> blocks;
  for (int k = 0; k < model.layer_count(); ++k) {
    const auto& s = model.layer_sizes();
    blocks.push_back({"layer" + std::to_string(k) + ".weight", model.weight_offset(k),
                      static_cast<std::size_t>(s[k + 1]) * s[k]});
    blocks.push_back({"layer" + std::to_string(k) + ".bias", model.bias_offset(k), static_cast<std::size_t>(s[k + 1])});
  }
  return blocks;
}

}  // namespace

TrainResult train(const TrainingData& data, const DecoderConfig& dcfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch) {
  dcfg.validate();
  tcfg.validate();
  if (data.size() == 0 || data.shape_ids.empty()) throw std::invalid_argument("train: empty corpus");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  DecoderModel& model = result.model;
  model = DecoderModel(dcfg, data.shape_ids);
  model.initialize(tcfg.seed);
  const int l = model.latent_dim();
  const double lambda = dcfg.reg_weight();

  AdamState theta_state(model.param_count(), param_blocks(model));
  AdamState code_state(static_cast<std::size_t>(model.codes().size()), {{"latent_codes", 0, static_cast<std::size_t>(model.codes().size())}});

  std::mt19937_64 rng(tcfg.seed ^ 0x7261'696e'6261'7463ULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  const auto batch = static_cast<Eigen::Index>(tcfg.batch);
  Eigen::MatrixXd inputs(model.input_dim(), batch);
  std::vector<double> targets(static_cast<std::size_t>(batch));
  std::vector<std::uint32_t> shapes(static_cast<std::size_t>(batch));
  Eigen::MatrixXd code_grad(l, model.codes().cols());

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr_theta = lr_schedule(tcfg.lr_theta, epoch, tcfg.decay_interval);
    const double lr_codes = lr_schedule(tcfg.lr_codes, epoch, tcfg.decay_interval);
    double loss_sum = 0.0;
    for (int b = 0; b < tcfg.batches_per_epoch; ++b) {
      for (Eigen::Index j = 0; j < batch; ++j) {
        const std::size_t s = pick(rng);
        shapes[static_cast<std::size_t>(j)] = data.shape_of[s];
        targets[static_cast<std::size_t>(j)] = data.distances[s];
        inputs.block(0, j, l, 1) = model.codes().col(data.shape_of[s]);
        inputs.block(l, j, 3, 1) = data.points[s];
      }
      BatchLoss bl = loss_and_gradients(model, inputs, targets, dcfg.clamp_delta);
      if (!std::isfinite(bl.mean_l1)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += bl.mean_l1;

      // Per-sample code regularization lambda * |z|^2, averaged over the batch.
      code_grad.setZero();
      const double reg_scale = 2.0 * lambda / static_cast<double>(batch);
      for (Eigen::Index j = 0; j < batch; ++j) {
        const auto s = shapes[static_cast<std::size_t>(j)];
        code_grad.col(s) += bl.grads.inputs.block(0, j, l, 1) + reg_scale * model.codes().col(s);
      }
      adam_step(model.params(), bl.grads.params, theta_state, lr_theta);
      adam_step(std::span<double>(model.codes().data(), static_cast<std::size_t>(model.codes().size())),
                std::span<const double>(code_grad.data(), static_cast<std::size_t>(code_grad.size())), code_state,
                lr_codes);
    }
    result.history.epochs.push_back({epoch, lr_theta, lr_codes, loss_sum / tcfg.batches_per_epoch});
    if (on_epoch) on_epoch(result.history.epochs.back());
  }
  result.history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult train(const trainset::CorpusManifest& manifest, const DecoderConfig& dcfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch) {
  tcfg.validate();
  if (manifest.records.empty()) throw std::invalid_argument("train: manifest has no records");
  return train(load_training_data(manifest), dcfg, tcfg, on_epoch);
}

// ---------------------------------------------------------------- reconstruction

TriMesh reconstruct(const DecoderModel& model, std::span<const double> z, int resolution,
                    std::optional<double> target_volume) {
  if (resolution < 8) throw std::invalid_argument("reconstruct: resolution must be at least 8");
  SdfGrid grid = SdfGrid::cube(-1.0, 1.0, resolution);
  decode_grid(model, z, grid);
  const double floor_value = 0.5 * grid.spacing;
  const int last = resolution - 1;
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == last || j == last || k == last) {
          grid.at(i, j, k) = std::max(grid.at(i, j, k), floor_value);
        }
      }
    }
  }
  TriMesh mesh = largest_component(marching_cubes(grid, 0.0));
  if (mesh.empty()) throw DegenerateLatentError("degenerate latent code: decoded field has no zero level set");
  double volume = 0.0;
  try {
    volume = mesh_volume(mesh);
  } catch (const MeshError&) {
    volume = -1.0;
  }
  if (!(volume > 0.0)) throw DegenerateLatentError("degenerate latent code: reconstructed surface encloses no volume");
  if (target_volume) mesh = scale_to_volume(mesh, *target_volume);
  return mesh;
}

// ---------------------------------------------------------------- files

void save_model(const DecoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  binio::put_magic(out, "ADEC");
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.latent_dim()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_sizes().size()));
  for (int s : model.layer_sizes()) binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (double p : model.params()) binio::put(out, p);
  binio::put<std::uint64_t>(out, model.shape_count());
  for (std::size_t c = 0; c < model.shape_count(); ++c) {
    binio::put_string(out, model.shape_ids()[c]);
    for (int i = 0; i < model.latent_dim(); ++i) binio::put(out, model.codes()(i, static_cast<Eigen::Index>(c)));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DecoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  try {
    binio::expect_magic(in, "ADEC", "model file");
    const auto l = binio::get<std::uint32_t>(in);
    const auto n_sizes = binio::get<std::uint32_t>(in);
    if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("layer count out of range");
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) {
      s = static_cast<int>(binio::get<std::uint32_t>(in));
      if (s < 1 || s > 1 << 16) throw std::runtime_error("layer size out of range");
    }
    if (sizes.front() != static_cast<int>(l) + 3 || sizes.back() != 1) {
      throw std::runtime_error("layer sizes inconsistent with latent dimension");
    }
    DecoderConfig cfg;
    cfg.latent_dim = static_cast<int>(l);
    cfg.hidden_layers = static_cast<int>(n_sizes) - 2;
    cfg.hidden_width = sizes[1];
    for (std::size_t k = 1; k + 1 < sizes.size(); ++k) {
      if (sizes[k] != cfg.hidden_width) throw std::runtime_error("hidden layers must share one width");
    }
    DecoderModel model(cfg, {});
    for (auto& p : model.params()) p = binio::get<double>(in);
    const auto n_codes = binio::get<std::uint64_t>(in);
    if (n_codes > (1u << 24)) throw std::runtime_error("code count out of range");
    std::vector<std::string> ids;
    std::vector<double> values;
    for (std::uint64_t c = 0; c < n_codes; ++c) {
      ids.push_back(binio::get_string(in));
      for (std::uint32_t i = 0; i < l; ++i) values.push_back(binio::get<double>(in));
    }
    DecoderModel full(cfg, ids);
    std::copy(model.params().begin(), model.params().end(), full.params().begin());
    full.codes() = Eigen::Map<Eigen::MatrixXd>(values.data(), l, static_cast<Eigen::Index>(n_codes));
    return full;
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("corrupt model file " + path.string() + ": " + e.what());
  }
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "epoch,lr_theta,lr_z,mean_loss\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.lr_theta << ',' << e.lr_codes << ',' << e.mean_loss << '\n';
  }
}

}  // namespace lf::nsdf
