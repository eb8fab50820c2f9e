#include "lf/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace lf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected true/false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string key;
  std::string doc;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename Get>
Field real(std::string key, std::string doc, Get ref) {
  return {std::move(key), std::move(doc),
          [ref](PipelineConfig& c, const std::string& v) { ref(c) = to_double(v); },
          [ref](const PipelineConfig& c) { return fmt(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Int, typename Get>
Field integer(std::string key, std::string doc, Get ref) {
  return {std::move(key), std::move(doc),
          [ref](PipelineConfig& c, const std::string& v) { ref(c) = to_int<Int>(v); },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Get>
Field boolean(std::string key, std::string doc, Get ref) {
  return {std::move(key), std::move(doc),
          [ref](PipelineConfig& c, const std::string& v) { ref(c) = to_bool(v); },
          [ref](const PipelineConfig& c) { return std::string(ref(const_cast<PipelineConfig&>(c)) ? "true" : "false"); }};
}

Field recipe_field(spline::Recipe r) {
  const std::string name(spline::recipe_name(r));
  return {"trainset.recipe." + name, "magnitudes of " + name + " (comma list, empty disables)",
          [r](PipelineConfig& c, const std::string& v) {
            std::vector<double> mags;
            for (const auto& item : split_list(v)) mags.push_back(to_double(item));
            auto& grids = c.trainset.recipes;
            std::erase_if(grids, [r](const trainset::RecipeGrid& g) { return g.recipe == r; });
            if (!mags.empty()) grids.push_back({r, mags});
            std::stable_sort(grids.begin(), grids.end(), [](const auto& a, const auto& b) {
              return static_cast<int>(a.recipe) < static_cast<int>(b.recipe);
            });
          },
          [r](const PipelineConfig& c) {
            std::string out;
            for (const auto& g : c.trainset.recipes) {
              if (g.recipe != r) continue;
              for (double m : g.magnitudes) out += (out.empty() ? "" : ",") + fmt(m);
            }
            return out;
          }};
}

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(integer<std::uint64_t>("global.seed", "seed for every stage; LF_SEED overrides",
                                       [](C& c) -> auto& { return c.seed; }));

    f.push_back({"trainset.bases", "base shapes: triangle, square, hexagon, cylinder",
                 [](C& c, const std::string& v) {
                   c.trainset.bases.clear();
                   for (const auto& item : split_list(v)) c.trainset.bases.push_back(trainset::parse_base(item));
                 },
                 [](const C& c) {
                   std::string out;
                   for (auto b : c.trainset.bases) out += (out.empty() ? "" : ",") + std::string(trainset::base_name(b));
                   return out;
                 }});
    for (auto r : spline::kAllRecipes) f.push_back(recipe_field(r));
    f.push_back(integer<std::size_t>("trainset.samples_per_shape", "SDF samples per shape",
                                     [](C& c) -> auto& { return c.trainset.samples_per_shape; }));
    f.push_back(integer<std::size_t>("trainset.chains", "extra records with random recipe chains",
                                     [](C& c) -> auto& { return c.trainset.chains; }));
    f.push_back(integer<std::size_t>("trainset.max_chain", "longest recipe chain",
                                     [](C& c) -> auto& { return c.trainset.max_chain; }));
    f.push_back(real("trainset.height", "prism height", [](C& c) -> auto& { return c.trainset.height; }));
    f.push_back(real("trainset.radius", "polygon apothem", [](C& c) -> auto& { return c.trainset.radius; }));
    f.push_back(integer<int>("trainset.facets", "cylinder facets", [](C& c) -> auto& { return c.trainset.facets; }));
    f.push_back(integer<int>("trainset.height_segments", "side wall rings",
                             [](C& c) -> auto& { return c.trainset.height_segments; }));
    f.push_back(integer<int>("trainset.lattice_points", "FFD control points per axis",
                             [](C& c) -> auto& { return c.trainset.lattice_points; }));
    f.push_back(integer<int>("trainset.lattice_degree", "FFD spline degree",
                             [](C& c) -> auto& { return c.trainset.lattice_degree; }));

    f.push_back(integer<int>("decoder.latent_dim", "latent code size", [](C& c) -> auto& { return c.decoder.latent_dim; }));
    f.push_back(integer<int>("decoder.hidden_layers", "hidden layers", [](C& c) -> auto& { return c.decoder.hidden_layers; }));
    f.push_back(integer<int>("decoder.hidden_width", "neurons per hidden layer",
                             [](C& c) -> auto& { return c.decoder.hidden_width; }));
    f.push_back(real("decoder.clamp_delta", "SDF clamp for the L1 loss", [](C& c) -> auto& { return c.decoder.clamp_delta; }));
    f.push_back(real("decoder.latent_reg_weight", "code regularization; negative = 1e-4 / latent_dim",
                     [](C& c) -> auto& { return c.decoder.latent_reg_weight; }));

    f.push_back(integer<int>("training.epochs", "epochs", [](C& c) -> auto& { return c.training.epochs; }));
    f.push_back(integer<int>("training.batch", "samples per mini-batch", [](C& c) -> auto& { return c.training.batch; }));
    f.push_back(integer<int>("training.batches_per_epoch", "mini-batches per epoch",
                             [](C& c) -> auto& { return c.training.batches_per_epoch; }));
    f.push_back(real("training.lr_theta", "initial network learning rate", [](C& c) -> auto& { return c.training.lr_theta; }));
    f.push_back(real("training.lr_codes", "initial latent-code learning rate",
                     [](C& c) -> auto& { return c.training.lr_codes; }));
    f.push_back(integer<long>("training.decay_interval", "epochs between learning-rate halvings",
                              [](C& c) -> auto& { return c.training.decay_interval; }));

    f.push_back(integer<long>("optimizer.max_iters", "iteration / generation limit",
                              [](C& c) -> auto& { return c.optimizer.criteria.max_iters; }));
    f.push_back(integer<long>("optimizer.max_evals", "objective evaluation limit",
                              [](C& c) -> auto& { return c.optimizer.criteria.max_evals; }));
    f.push_back(integer<int>("optimizer.stall_window", "iterations compared by the stall test",
                             [](C& c) -> auto& { return c.optimizer.criteria.stall_window; }));
    f.push_back(real("optimizer.stall_tol", "relative decrease below which the run stalls; 0 disables",
                     [](C& c) -> auto& { return c.optimizer.criteria.stall_tol; }));
    f.push_back(real("optimizer.direct_epsilon", "DIRECT improvement epsilon",
                     [](C& c) -> auto& { return c.optimizer.direct_epsilon; }));
    f.push_back(integer<std::size_t>("optimizer.pop_size", "SOGA population", [](C& c) -> auto& { return c.optimizer.pop_size; }));
    f.push_back(real("optimizer.crossover_rate", "SOGA crossover probability",
                     [](C& c) -> auto& { return c.optimizer.crossover_rate; }));
    f.push_back(real("optimizer.mutation_rate", "SOGA per-gene mutation probability",
                     [](C& c) -> auto& { return c.optimizer.mutation_rate; }));
    f.push_back(real("optimizer.bounds_inflation", "latent box inflation relative to the code range",
                     [](C& c) -> auto& { return c.optimizer.bounds_inflation; }));
    f.push_back(integer<int>("optimizer.resolution", "marching-cubes grid per evaluation",
                             [](C& c) -> auto& { return c.optimizer.resolution; }));
    f.push_back(boolean("optimizer.volume_constraint", "rescale every design to the reference volume",
                        [](C& c) -> auto& { return c.optimizer.volume_constraint; }));
    f.push_back(integer<int>("optimizer.top_k", "best designs written as meshes", [](C& c) -> auto& { return c.optimizer.top_k; }));
    f.push_back(boolean("optimizer.parallel_evaluations", "evaluate independent designs concurrently",
                        [](C& c) -> auto& { return c.optimizer.parallel_evaluations; }));

    f.push_back(real("objective.length", "channel length along the flow [m]",
                     [](C& c) -> auto& { return c.objective.channel.length; }));
    f.push_back(real("objective.width", "channel width [m]", [](C& c) -> auto& { return c.objective.channel.width; }));
    f.push_back(real("objective.height", "channel height [m]", [](C& c) -> auto& { return c.objective.channel.height; }));
    f.push_back(real("objective.barrel_speed", "barrel speed [m/s]", [](C& c) -> auto& { return c.objective.channel.barrel_speed; }));
    f.push_back(real("objective.barrel_angle", "barrel direction against the channel axis [rad]",
                     [](C& c) -> auto& { return c.objective.channel.barrel_angle; }));
    f.push_back(real("objective.axial_speed", "uniform axial velocity offset [m/s]",
                     [](C& c) -> auto& { return c.objective.channel.axial_speed; }));
    f.push_back(integer<int>("objective.n_rect_y", "inflow rectangles across the width",
                             [](C& c) -> auto& { return c.objective.mixing.n_rect_y; }));
    f.push_back(integer<int>("objective.n_rect_z", "inflow rectangles across the height",
                             [](C& c) -> auto& { return c.objective.mixing.n_rect_z; }));
    f.push_back(integer<int>("objective.particles_per_rect", "particles per rectangle (multiple of 4)",
                             [](C& c) -> auto& { return c.objective.mixing.particles_per_rect; }));
    f.push_back(real("objective.inflow_portion", "central fraction of the inflow used",
                     [](C& c) -> auto& { return c.objective.mixing.inflow_portion; }));
    f.push_back(real("objective.dt", "RK4 step [s]", [](C& c) -> auto& { return c.objective.mixing.advect.dt; }));
    f.push_back(integer<long>("objective.max_steps", "RK4 steps per particle",
                              [](C& c) -> auto& { return c.objective.mixing.advect.max_steps; }));
    f.push_back(real("objective.v_min", "stagnation speed [m/s]", [](C& c) -> auto& { return c.objective.mixing.advect.v_min; }));
    f.push_back(integer<int>("objective.stuck_steps", "stagnant steps before a particle is dropped",
                             [](C& c) -> auto& { return c.objective.mixing.advect.stuck_steps; }));
    f.push_back(real("objective.ramp_fraction", "velocity ramp width / element radius",
                     [](C& c) -> auto& { return c.objective.surrogate.ramp_fraction; }));
    f.push_back(integer<int>("objective.sdf_resolution", "element SDF grid nodes along the longest axis",
                             [](C& c) -> auto& { return c.objective.surrogate.sdf_resolution; }));
    f.push_back(real("objective.element_scale", "unit-sphere shape to channel scale [m]",
                     [](C& c) -> auto& { return c.objective.element_scale; }));

    f.push_back(real("tsne.perplexity", "perplexity (capped at count / 4)", [](C& c) -> auto& { return c.tsne.perplexity; }));
    f.push_back(integer<int>("tsne.iterations", "gradient steps", [](C& c) -> auto& { return c.tsne.iterations; }));
    f.push_back(integer<int>("tsne.exaggeration_iters", "early exaggeration steps",
                             [](C& c) -> auto& { return c.tsne.exaggeration_iters; }));
    f.push_back(real("tsne.exaggeration", "early exaggeration factor", [](C& c) -> auto& { return c.tsne.exaggeration; }));
    f.push_back(real("tsne.learning_rate", "step size", [](C& c) -> auto& { return c.tsne.learning_rate; }));
    return f;
  }();
  return table;
}

}  // namespace

void PipelineConfig::resolve() {
  trainset.seed = seed;
  training.seed = seed;
  tsne.seed = seed;
  trainset.validate();
  decoder.validate();
  training.validate();
  objective.channel.validate();
  objective.mixing.validate();
  tsne.validate();
  if (!(objective.element_scale > 0.0)) throw ConfigError("objective.element_scale must be positive");
  if (optimizer.resolution < 8) throw ConfigError("optimizer.resolution must be at least 8");
  if (optimizer.top_k < 0) throw ConfigError("optimizer.top_k must be non-negative");
  if (!(optimizer.bounds_inflation >= 0.0)) throw ConfigError("optimizer.bounds_inflation must be non-negative");
}

PipelineConfig parse_config(std::istream& in, const std::string& source) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'section.key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

void apply_seed_override(PipelineConfig& cfg) {
  const char* env = std::getenv("LF_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    cfg.seed = to_int<std::uint64_t>(trim(env));
  } catch (const ConfigError&) {
    throw ConfigError(std::string("LF_SEED is not an unsigned integer: '") + env + "'");
  }
}

void write_config(const PipelineConfig& cfg, std::ostream& out) {
  std::string section;
  for (const auto& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << "# [" << s << "]\n";
      section = s;
    }
    out << "# " << f.doc << '\n' << f.key << " = " << f.get(cfg) << '\n';
  }
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_config(cfg, out);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace lf
