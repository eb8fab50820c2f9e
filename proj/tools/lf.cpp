// lf: corpus generation, auto-decoder training, latent-space tools and
// latent shape optimization.

#include <omp.h>

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "lf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lf;

namespace {

PipelineConfig read_config(const fs::path& path) {
  PipelineConfig cfg = load_config(path);
  apply_seed_override(cfg);
  cfg.resolve();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent shape parameterization pipeline"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "worker thread cap (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

  std::string config, out, manifest, model, id, latent, a, b, deformed, base, target, algo;
  int res = 64, N = 0;
  double volume = 0.0;
  std::vector<int> indices;

  auto* gen = app.add_subcommand("gen-trainset", "generate the FFD training corpus");
  gen->add_option("--config", config, "pipeline config")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train the auto-decoder");
  tr->add_option("--manifest", manifest, "corpus manifest.tsv")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", config, "pipeline config")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out, "model file")->required();

  auto* rec = app.add_subcommand("reconstruct", "extract the surface of one latent code");
  rec->add_option("--model", model)->required()->check(CLI::ExistingFile);
  auto* id_opt = rec->add_option("--id", id, "training shape id");
  auto* lat_opt = rec->add_option("--latent", latent, "comma-separated code, or a file holding one");
  id_opt->excludes(lat_opt);
  rec->add_option("--res", res, "grid nodes per axis")->required()->check(CLI::Range(8, 1024));
  auto* vol_opt = rec->add_option("--volume", volume, "rescale to this enclosed volume")->check(CLI::PositiveNumber);
  rec->add_option("--out", out, "mesh file (.obj or .stl)")->required();

  auto* itp = app.add_subcommand("interpolate", "meshes along the segment between two codes");
  itp->add_option("--model", model)->required()->check(CLI::ExistingFile);
  itp->add_option("--a", a)->required();
  itp->add_option("--b", b)->required();
  itp->add_option("--N", N, "interior steps")->required()->check(CLI::NonNegativeNumber);
  itp->add_option("--n", indices, "step indices, comma separated")->required()->delimiter(',');
  itp->add_option("--out", out, "output directory")->required();

  auto* ari = app.add_subcommand("arithmetic", "deformed - base + target");
  ari->add_option("--model", model)->required()->check(CLI::ExistingFile);
  ari->add_option("--deformed", deformed)->required();
  ari->add_option("--base", base)->required();
  ari->add_option("--target", target)->required();
  ari->add_option("--out", out)->required();

  auto* ts = app.add_subcommand("tsne", "2D embedding of the latent codes");
  ts->add_option("--model", model)->required()->check(CLI::ExistingFile);
  ts->add_option("--out", out, "CSV file; a .gp script is written next to it")->required();

  auto* op = app.add_subcommand("optimize", "minimize the mixing objective over the latent box");
  op->add_option("--model", model)->required()->check(CLI::ExistingFile);
  op->add_option("--algo", algo)->required()->check(CLI::IsMember({"direct", "soga"}));
  op->add_option("--config", config, "pipeline config")->required()->check(CLI::ExistingFile);
  op->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (jobs > 0) omp_set_num_threads(jobs);

  try {
    if (gen->parsed()) {
      const auto cfg = read_config(config);
      const auto m = pipeline::gen_trainset(cfg, out);
      std::printf("%zu shapes, %zu samples each -> %s\n", m.records.size(), m.samples_per_shape,
                  (fs::path(out) / trainset::kManifestName).c_str());
    } else if (tr->parsed()) {
      const auto cfg = read_config(config);
      const int every = std::max(1, cfg.training.epochs / 20);
      const auto r = pipeline::train(manifest, cfg, out, [&](const nsdf::EpochRecord& e) {
        if (e.epoch % every == 0 || e.epoch + 1 == cfg.training.epochs) {
          std::printf("epoch %5d  loss %.6g  lr %.3g / %.3g\n", e.epoch, e.mean_loss, e.lr_theta, e.lr_codes);
          std::fflush(stdout);
        }
      });
      std::printf("trained %zu codes in %.1f s -> %s\n", r.model.shape_count(), r.history.wall_seconds, out.c_str());
    } else if (rec->parsed()) {
      if (id_opt->count() == 0 && lat_opt->count() == 0) throw std::invalid_argument("give --id or --latent");
      Eigen::VectorXd z;
      if (id_opt->count() > 0) {
        z = nsdf::load_model(model).code(id);
      } else {
        z = pipeline::parse_latent(latent);
      }
      std::optional<double> v;
      if (vol_opt->count() > 0) v = volume;
      const auto mesh = pipeline::reconstruct(model, z, res, v, out);
      std::printf("%zu vertices, %zu triangles -> %s\n", mesh.vertices.size(), mesh.triangles.size(), out.c_str());
    } else if (itp->parsed()) {
      const auto files = pipeline::interpolate(model, a, b, N, indices, out);
      std::printf("%zu meshes -> %s\n", files.size(), out.c_str());
    } else if (ari->parsed()) {
      pipeline::arithmetic(model, deformed, base, target, out);
      std::printf("-> %s\n", out.c_str());
    } else if (ts->parsed()) {
      const auto emb = pipeline::tsne(model, out);
      std::printf("%zu points, final KL %.4f -> %s\n", emb.points.size(), emb.kl.empty() ? 0.0 : emb.kl.back(),
                  out.c_str());
    } else if (op->parsed()) {
      const auto cfg = read_config(config);
      const auto o = pipeline::optimize(model, algo, cfg, out);
      std::printf("%s: best J %.6g (centre %.6g) after %ld evaluations, %ld iterations, stop: %s\n", algo.c_str(),
                  o.report.best_f, o.center_J, o.report.evaluations, o.report.iterations,
                  std::string(opt::termination_name(o.report.reason)).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
