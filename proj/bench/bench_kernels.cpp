// Serial reference vs OpenMP kernel timings. Usage: lf_bench [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "lf/latentlab.hpp"
#include "lf/meshops.hpp"
#include "lf/neuralsdf.hpp"
#include "lf/objective.hpp"
#include "lf/trainset.hpp"

using namespace lf;

namespace {

double best_of(int repeats, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, int repeats, const std::function<void()>& serial, const std::function<void()>& parallel) {
  const double s = best_of(repeats, serial), p = best_of(repeats, parallel);
  std::printf("%-28s serial %9.4f s   omp %9.4f s   x%.2f\n", name, s, p, s / p);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("threads: %d\n", omp_get_max_threads());

  const SdfQuery query(make_icosphere(0.8, 4));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(50000);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  std::vector<double> d(pts.size());
  row("signed_distances 50k", repeats, [&] { signed_distances_serial(query, pts, d); },
      [&] { signed_distances(query, pts, d); });
  SdfGrid grid = SdfGrid::cube(-1, 1, 48);
  row("fill_grid 48^3", repeats, [&] { fill_grid_serial(query, grid); }, [&] { fill_grid(query, grid); });

  nsdf::DecoderModel model(nsdf::DecoderConfig{}, {"a"});
  model.initialize(2);
  Eigen::MatrixXd X(model.input_dim(), 4096);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  std::vector<double> y(4096), up(4096, 1.0 / 4096);
  row("decode_batch 4096", repeats, [&] { nsdf::decode_batch_serial(model, X, y); },
      [&] { nsdf::decode_batch(model, X, y); });
  row("backward 4096", 1, [&] { nsdf::backward_serial(model, X, up); }, [&] { nsdf::backward(model, X, up); });

  Eigen::MatrixXd codes(400, 8);
  for (Eigen::Index i = 0; i < codes.size(); ++i) codes.data()[i] = u(rng);
  row("tsne affinities 400", repeats, [&] { latent::conditional_affinities_serial(codes, 30); },
      [&] { latent::conditional_affinities(codes, 30); });

  const mix::ChannelSpec spec;
  const auto prism = trainset::make_basis_shape(trainset::BaseShape::square, 2.0, 1.0, 32, 8);
  const mix::SurrogateField field(mix::place_element(normalize_to_unit_sphere(prism).mesh, spec, 0.003), spec);
  std::vector<Vec3> starts;
  for (const auto& r : mix::inflow_rectangles(spec, mix::MixingConfig{}))
    for (const auto& q : r) starts.emplace_back(0.0, q.x(), q.y());
  row("advect 192 particles", repeats, [&] { mix::advect_all_serial(field, starts, spec.length, {}); },
      [&] { mix::advect_all(field, starts, spec.length, {}); });
  return 0;
}
