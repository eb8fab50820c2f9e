#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>

#include "lf/meshops.hpp"
#include "lf/neuralsdf.hpp"
#include "lf/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace lf;
using lf::test::TempDir;

namespace {

struct Run {
  int status;
  std::string err;
};

Run lf_run(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = env + " " LF_EXE " " + args + " > /dev/null 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  return {rc, test::slurp(err)};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kCorpusConfig =
    "global.seed = 4\n"
    "trainset.bases = square, cylinder\n"
    "trainset.recipe.shrink_x =\n"
    "trainset.recipe.translate_top_x =\n"
    "trainset.recipe.translate_top_y =\n"
    "trainset.recipe.expand_middle =\n"
    "trainset.recipe.expand_top = 0.3\n"
    "trainset.recipe.twist_top = 0.5\n"
    "trainset.samples_per_shape = 2000\n"
    "trainset.chains = 0\n"
    "trainset.facets = 24\n";

// Corpus plus a model trained long enough to give closed surfaces.
struct Workspace {
  TempDir dir;
  fs::path manifest, model, config;
  std::size_t shapes = 0;

  Workspace() {
    config = dir / "cfg.txt";
    write_text(config, std::string(kCorpusConfig) +
                           "decoder.latent_dim = 2\n"
                           "decoder.hidden_layers = 4\n"
                           "decoder.hidden_width = 64\n"
                           "training.epochs = 400\n"
                           "training.batch = 2048\n"
                           "training.batches_per_epoch = 2\n"
                           "optimizer.max_iters = 2\n"
                           "optimizer.pop_size = 8\n"
                           "optimizer.resolution = 20\n"
                           "optimizer.top_k = 10\n");
    REQUIRE(lf_run("gen-trainset --config " + config.string() + " --out " + (dir / "corpus").string(), dir).status == 0);
    manifest = dir / "corpus" / trainset::kManifestName;
    shapes = trainset::load_manifest(manifest).records.size();
    model = dir / "model.adec";
    REQUIRE(lf_run("train --manifest " + manifest.string() + " --config " + config.string() + " --out " + model.string(),
                   dir)
                .status == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

std::size_t line_count(const fs::path& p) {
  const auto s = test::slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-trainset: counts, reruns and a missing parent") {
    TempDir tmp;
    write_text(tmp / "cfg.txt", kCorpusConfig);
    const std::string cfg = (tmp / "cfg.txt").string();
    REQUIRE(lf_run("gen-trainset --config " + cfg + " --out " + (tmp / "a").string(), tmp).status == 0);
    REQUIRE(lf_run("gen-trainset --config " + cfg + " --out " + (tmp / "b").string(), tmp).status == 0);
    const auto m = trainset::load_manifest(tmp / "a" / trainset::kManifestName);
    CHECK(m.records.size() == 2 * 3);
    for (const auto& r : m.records) {
      CHECK(test::slurp(m.sdf_file(r)) == test::slurp(tmp / "b" / fs::relative(m.sdf_file(r), tmp / "a")));
    }
    CHECK(test::slurp(tmp / "a" / trainset::kManifestName) == test::slurp(tmp / "b" / trainset::kManifestName));

    const auto bad = lf_run("gen-trainset --config " + cfg + " --out " + (tmp / "nope/deeper").string(), tmp);
    CHECK(bad.status != 0);
    CHECK(!fs::exists(tmp / "nope"));
  }

  TEST_CASE("config errors and the seed override") {
    TempDir tmp;
    write_text(tmp / "bad.txt", std::string(kCorpusConfig) + "trainset.colour = red\n");
    const auto r = lf_run("gen-trainset --config " + (tmp / "bad.txt").string() + " --out " + (tmp / "c").string(), tmp);
    CHECK(r.status != 0);
    CHECK(r.err.find("trainset.colour") != std::string::npos);
    CHECK(!fs::exists(tmp / "c"));

    write_text(tmp / "cfg.txt", kCorpusConfig);
    const std::string cfg = (tmp / "cfg.txt").string();
    REQUIRE(lf_run("gen-trainset --config " + cfg + " --out " + (tmp / "s4").string(), tmp).status == 0);
    REQUIRE(lf_run("gen-trainset --config " + cfg + " --out " + (tmp / "s9").string(), tmp, "LF_SEED=9").status == 0);
    CHECK(test::slurp(tmp / "s9/config.resolved").find("global.seed = 9\n") != std::string::npos);
    CHECK(test::slurp(tmp / "s4/config.resolved").find("global.seed = 4\n") != std::string::npos);
    const auto m = trainset::load_manifest(tmp / "s4" / trainset::kManifestName);
    const auto& rec = m.records.front();
    CHECK(test::slurp(m.sdf_file(rec)) != test::slurp(tmp / "s9" / fs::relative(m.sdf_file(rec), tmp / "s4")));
  }

  TEST_CASE("train: short run writes the model and its history") {
    auto& w = workspace();
    TempDir tmp;
    write_text(tmp / "cfg.txt", std::string(kCorpusConfig) +
                                    "decoder.latent_dim = 2\n"
                                    "training.epochs = 50\n"
                                    "training.batch = 1024\n"
                                    "training.batches_per_epoch = 1\n");
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = lf_run("train --manifest " + w.manifest.string() + " --config " + (tmp / "cfg.txt").string() +
                              " --out " + (tmp / "m.adec").string(),
                          tmp);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r.status == 0);
    CHECK(secs < 60.0);
    CHECK(fs::exists(tmp / "m.adec"));
    CHECK(fs::exists(tmp / "m.adec.history.csv"));
    CHECK(line_count(tmp / "m.adec.history.csv") == 50 + 1);
    const auto model = nsdf::load_model(tmp / "m.adec");
    CHECK(model.latent_dim() == 2);
    CHECK(model.shape_count() == w.shapes);
  }

  TEST_CASE("train: a corrupt sample file is named") {
    auto& w = workspace();
    TempDir tmp;
    fs::copy(w.manifest.parent_path(), tmp / "corpus", fs::copy_options::recursive);
    const auto m = trainset::load_manifest(tmp / "corpus" / trainset::kManifestName);
    const fs::path victim = m.sdf_file(m.records[1]);
    fs::resize_file(victim, fs::file_size(victim) / 2);
    write_text(tmp / "cfg.txt", "training.epochs = 2\ndecoder.latent_dim = 2\n");
    const auto r = lf_run("train --manifest " + (tmp / "corpus" / trainset::kManifestName).string() + " --config " +
                              (tmp / "cfg.txt").string() + " --out " + (tmp / "m.adec").string(),
                          tmp);
    CHECK(r.status != 0);
    CHECK(r.err.find(victim.filename().string()) != std::string::npos);
    CHECK(!fs::exists(tmp / "m.adec"));
  }

  TEST_CASE("latent tools") {
    auto& w = workspace();
    const auto model = nsdf::load_model(w.model);
    const auto& ids = model.shape_ids();
    TempDir tmp;

    const auto rec = lf_run("reconstruct --model " + w.model.string() + " --id " + ids[0] +
                                " --res 48 --volume 0.5 --out " + (tmp / "r.obj").string(),
                            tmp);
    REQUIRE(rec.status == 0);
    const TriMesh mesh = read_obj(tmp / "r.obj");
    CHECK(mesh.is_watertight());
    CHECK(test::rel_err(mesh_volume(mesh), 0.5) < 1e-6);

    const auto itp = lf_run("interpolate --model " + w.model.string() + " --a " + ids[0] + " --b " + ids.back() +
                                " --N 20 --n 1,3,7,13,17,20 --out " + (tmp / "interp").string(),
                            tmp);
    REQUIRE(itp.status == 0);
    int objs = 0;
    for (const auto& e : fs::directory_iterator(tmp / "interp")) objs += e.path().extension() == ".obj";
    CHECK(objs == 6);
    CHECK(fs::exists(tmp / "interp/interp_13.obj"));
    CHECK(lf_run("interpolate --model " + w.model.string() + " --a " + ids[0] + " --b " + ids[1] +
                     " --N 5 --n 1,7 --out " + (tmp / "bad").string(),
                 tmp)
              .status != 0);
    CHECK(!fs::exists(tmp / "bad"));

    std::string base, deformed, target;
    for (const auto& id : ids) {
      if (id.rfind("square", 0) == 0 && id.find("base") != std::string::npos) base = id;
      if (id.rfind("square", 0) == 0 && id.find("twist") != std::string::npos) deformed = id;
      if (id.rfind("cylinder", 0) == 0 && id.find("base") != std::string::npos) target = id;
    }
    REQUIRE(!base.empty());
    REQUIRE(!deformed.empty());
    REQUIRE(!target.empty());
    const auto ari = lf_run("arithmetic --model " + w.model.string() + " --deformed " + deformed + " --base " + base +
                                " --target " + target + " --out " + (tmp / "arith.obj").string(),
                            tmp);
    REQUIRE(ari.status == 0);
    CHECK(read_obj(tmp / "arith.obj").triangles.size() > 0);
    CHECK(lf_run("arithmetic --model " + w.model.string() + " --deformed nope --base " + base + " --target " + target +
                     " --out " + (tmp / "x.obj").string(),
                 tmp)
              .status != 0);

    REQUIRE(lf_run("tsne --model " + w.model.string() + " --out " + (tmp / "emb.csv").string(), tmp).status == 0);
    CHECK(line_count(tmp / "emb.csv") == w.shapes + 1);

    const auto lat = lf_run("reconstruct --model " + w.model.string() + " --latent 0.0,0.0 --res 32 --out " +
                                (tmp / "z.stl").string(),
                            tmp);
    CHECK((lat.status == 0 || lat.err.find("degenerate") != std::string::npos));
    CHECK(lf_run("reconstruct --model " + w.model.string() + " --latent 1,2,3 --res 32 --out " +
                     (tmp / "z3.obj").string(),
                 tmp)
              .status != 0);
  }

  TEST_CASE("optimize with the genetic algorithm writes ranked meshes") {
    auto& w = workspace();
    TempDir tmp;
    const auto r = lf_run("optimize --model " + w.model.string() + " --algo soga --config " + w.config.string() +
                              " --out " + (tmp / "opt").string(),
                          tmp);
    REQUIRE(r.status == 0);
    const std::regex name(R"(best_(\d\d)_J(-?\d+\.\d{6})\.obj)");
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(tmp / "opt")) {
      const auto fn = e.path().filename().string();
      if (std::regex_match(fn, name)) found.push_back(fn);
    }
    CHECK(found.size() == 10);
    std::sort(found.begin(), found.end());
    double prev = -INFINITY;
    for (const auto& fn : found) {
      std::smatch m;
      std::regex_match(fn, m, name);
      const double J = std::stod(m[2]);
      CHECK(J >= prev);
      prev = J;
      const TriMesh mesh = read_obj(tmp / "opt" / fn);
      CHECK(mesh.is_watertight());
    }
    CHECK(fs::exists(tmp / "opt/eval_log.csv"));
    CHECK(test::slurp(tmp / "opt/report.txt").find("algorithm = soga") != std::string::npos);

    // Same seed, same run.
    REQUIRE(lf_run("optimize --model " + w.model.string() + " --algo soga --config " + w.config.string() + " --out " +
                       (tmp / "again").string(),
                   tmp)
                .status == 0);
    CHECK(test::slurp(tmp / "opt/eval_log.csv") == test::slurp(tmp / "again/eval_log.csv"));

    // Every evaluation stays inside the inflated code box.
    const auto bounds = pipeline::latent_bounds(nsdf::load_model(w.model), 0.1);
    std::ifstream log(tmp / "opt/eval_log.csv");
    std::string line;
    std::getline(log, line);
    while (std::getline(log, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      std::vector<double> x;
      for (std::size_t d = 0; d < bounds.dim(); ++d) {
        std::getline(ss, cell, ',');
        x.push_back(std::stod(cell));
      }
      CHECK(bounds.contains(x));
    }
    CHECK(lf_run("optimize --model " + w.model.string() + " --algo cmaes --config " + w.config.string() + " --out " +
                     (tmp / "x").string(),
                 tmp)
              .status != 0);
  }
}
