#include "lf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace lf::pipeline {

trainset::CorpusManifest gen_trainset(const PipelineConfig& cfg, const fs::path& out_dir) {
  auto manifest = trainset::generate_corpus(cfg.trainset, out_dir);
  save_config(cfg, out_dir / "config.resolved");
  return manifest;
}

nsdf::TrainResult train(const fs::path& manifest_path, const PipelineConfig& cfg, const fs::path& out_model,
                        const nsdf::EpochCallback& on_epoch) {
  const auto manifest = trainset::load_manifest(manifest_path);
  auto result = nsdf::train(manifest, cfg.decoder, cfg.training, on_epoch);
  nsdf::save_model(result.model, out_model);
  nsdf::save_history(result.history, history_path(out_model));
  save_config(cfg, fs::path(out_model.string() + ".config.resolved"));
  return result;
}

Eigen::VectorXd parse_latent(const std::string& text) {
  std::string list = text;
  if (fs::is_regular_file(text)) {
    std::ifstream in(text);
    std::getline(in, list);
  }
  std::vector<double> values;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t\r", used) != std::string::npos) {
      throw std::invalid_argument("latent code: '" + item + "' is not a number");
    }
    values.push_back(v);
  }
  if (values.empty()) throw std::invalid_argument("latent code is empty");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

namespace {

std::span<const double> as_span(const Eigen::VectorXd& z) { return {z.data(), static_cast<std::size_t>(z.size())}; }

}  // namespace

TriMesh reconstruct(const fs::path& model_path, const Eigen::VectorXd& z, int resolution, std::optional<double> volume,
                    const fs::path& out) {
  const auto model = nsdf::load_model(model_path);
  auto mesh = nsdf::reconstruct(model, as_span(z), resolution, volume);
  write_mesh(mesh, out);
  return mesh;
}

std::vector<fs::path> interpolate(const fs::path& model_path, const std::string& a, const std::string& b, int N,
                                  const std::vector<int>& indices, const fs::path& out_dir, int resolution) {
  const auto model = nsdf::load_model(model_path);
  const Eigen::VectorXd za = model.code(a), zb = model.code(b);
  // Validate every index before writing anything.
  for (int n : indices) (void)latent::interpolate(za, zb, N, n);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (int n : indices) {
    const Eigen::VectorXd z = latent::interpolate(za, zb, N, n);
    const auto path = out_dir / ("interp_" + std::to_string(n) + ".obj");
    write_mesh(nsdf::reconstruct(model, as_span(z), resolution), path);
    written.push_back(path);
  }
  return written;
}

TriMesh arithmetic(const fs::path& model_path, const std::string& deformed, const std::string& base,
                   const std::string& target, const fs::path& out, int resolution) {
  const auto model = nsdf::load_model(model_path);
  const Eigen::VectorXd z = latent::arithmetic(model.code(deformed), model.code(base), model.code(target));
  auto mesh = nsdf::reconstruct(model, as_span(z), resolution);
  write_mesh(mesh, out);
  return mesh;
}

latent::Embedding2D tsne(const fs::path& model_path, const fs::path& out_csv, const latent::TsneConfig& base_cfg) {
  const auto model = nsdf::load_model(model_path);
  const Eigen::MatrixXd points = model.codes().transpose();
  latent::TsneConfig cfg = base_cfg;
  cfg.perplexity = std::min(cfg.perplexity, latent::default_perplexity(model.shape_count()));
  std::vector<std::string> labels;
  for (const auto& id : model.shape_ids()) labels.push_back(latent::base_label(id));
  auto emb = latent::tsne_embed(points, labels, cfg);
  if (emb.jittered > 0) {
    std::cerr << "warning: " << emb.jittered << " duplicate latent codes jittered before embedding\n";
  }
  latent::write_embedding(emb, model.shape_ids(), out_csv);
  return emb;
}

opt::Bounds latent_bounds(const nsdf::DecoderModel& model, double inflation) {
  if (model.shape_count() == 0) throw std::invalid_argument("model has no latent codes");
  opt::Bounds b;
  for (Eigen::Index i = 0; i < model.codes().rows(); ++i) {
    double lo = model.codes().row(i).minCoeff();
    double hi = model.codes().row(i).maxCoeff();
    double range = hi - lo;
    if (!(range > 0.0)) range = std::max(1e-3, 1e-3 * std::abs(lo));
    lo -= 0.5 * inflation * range;
    hi += 0.5 * inflation * range;
    if (!(hi > lo)) hi = lo + range;
    b.lower.push_back(lo);
    b.upper.push_back(hi);
  }
  return b;
}

double reference_volume(const trainset::CorpusConfig& cfg) {
  const auto prism =
      trainset::make_basis_shape(trainset::BaseShape::square, cfg.height, cfg.radius, cfg.facets, cfg.height_segments);
  return mesh_volume(normalize_to_unit_sphere(prism).mesh);
}

LatentObjective::LatentObjective(const nsdf::DecoderModel& model, const PipelineConfig& cfg)
    : model_(model), cfg_(cfg), volume_(pipeline::reference_volume(cfg.trainset)) {}

TriMesh LatentObjective::design(std::span<const double> z) const {
  std::optional<double> target;
  if (cfg_.optimizer.volume_constraint) target = volume_;
  return nsdf::reconstruct(model_, z, cfg_.optimizer.resolution, target);
}

double LatentObjective::operator()(std::span<const double> z) const {
  try {
    const TriMesh shape = design(z);
    const TriMesh placed = mix::place_element(shape, cfg_.objective.channel, cfg_.objective.element_scale);
    const mix::SurrogateField field(placed, cfg_.objective.channel, cfg_.objective.surrogate);
    const auto r = mix::evaluate_mixing(field, cfg_.objective.channel, cfg_.objective.mixing);
    stuck_ += r.stuck;
    return r.J;
  } catch (const nsdf::DegenerateLatentError&) {
  } catch (const mix::ObjectiveError&) {
  } catch (const MeshError&) {
  }
  ++invalid_;
  return std::numeric_limits<double>::infinity();
}

OptimizeOutcome optimize(const fs::path& model_path, const std::string& algo, const PipelineConfig& cfg,
                         const fs::path& out_dir) {
  if (algo != "direct" && algo != "soga") throw std::invalid_argument("unknown algorithm '" + algo + "'");
  const auto model = nsdf::load_model(model_path);
  fs::create_directories(out_dir);
  save_config(cfg, out_dir / "config.resolved");

  const opt::Bounds bounds = latent_bounds(model, cfg.optimizer.bounds_inflation);
  const LatentObjective objective(model, cfg);
  const opt::Objective f = [&](std::span<const double> z) { return objective(z); };

  OptimizeOutcome outcome;
  outcome.reference_volume = objective.reference_volume();
  if (algo == "direct") {
    opt::DirectOptions o;
    o.epsilon = cfg.optimizer.direct_epsilon;
    o.parallel = cfg.optimizer.parallel_evaluations;
    outcome.report = opt::direct_minimize(f, bounds, cfg.optimizer.criteria, o);
    outcome.center_J = outcome.report.log.front().f;
  } else {
    opt::SogaOptions o;
    o.pop_size = cfg.optimizer.pop_size;
    o.crossover_rate = cfg.optimizer.crossover_rate;
    o.mutation_rate = cfg.optimizer.mutation_rate;
    o.seed = cfg.seed;
    o.parallel = cfg.optimizer.parallel_evaluations;
    outcome.report = opt::soga_minimize(f, bounds, cfg.optimizer.criteria, o);
    const std::vector<double> center = bounds.from_unit(std::vector<double>(bounds.dim(), 0.5));
    outcome.center_J = objective(center);
  }
  const auto& report = outcome.report;

  // Best distinct finite designs.
  std::vector<std::size_t> order(report.log.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.log[a].f < report.log[b].f; });
  std::vector<std::vector<double>> taken;
  for (const std::size_t k : order) {
    if (static_cast<int>(taken.size()) >= cfg.optimizer.top_k) break;
    const auto& e = report.log[k];
    if (!std::isfinite(e.f)) break;
    if (std::find(taken.begin(), taken.end(), e.x) != taken.end()) continue;
    taken.push_back(e.x);
    char name[64];
    std::snprintf(name, sizeof name, "best_%02zu_J%.6f.obj", taken.size(), e.f);
    const auto path = out_dir / name;
    write_mesh(objective.design(e.x), path);
    outcome.meshes.push_back(path);
    outcome.mesh_J.push_back(e.f);
  }

  const auto log_path = out_dir / "eval_log.csv";
  opt::write_eval_log(report, log_path);
  opt::write_summary(report, log_path, out_dir / "report.txt");
  std::ofstream extra(out_dir / "report.txt", std::ios::app);
  extra.precision(17);
  extra << "algorithm = " << algo << '\n'
        << "center_J = " << outcome.center_J << '\n'
        << "reference_volume = " << outcome.reference_volume << '\n'
        << "invalid_designs = " << objective.invalid_designs() << '\n'
        << "stuck_particles = " << objective.stuck_particles() << '\n';
  if (objective.stuck_particles() > 0) {
    std::cerr << "warning: " << objective.stuck_particles()
              << " particles stagnated and were excluded from their hulls\n";
  }
  if (objective.invalid_designs() > 0) {
    std::cerr << "warning: " << objective.invalid_designs() << " designs were invalid and scored +inf\n";
  }
  return outcome;
}

}  // namespace lf::pipeline
