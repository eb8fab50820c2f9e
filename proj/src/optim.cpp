#include "lf/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lf::opt {

void Bounds::validate() const {
  if (lower.empty()) throw std::invalid_argument("bounds: empty");
  if (lower.size() != upper.size()) throw std::invalid_argument("bounds: lower/upper size mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw std::invalid_argument("bounds: need finite lower < upper in coordinate " + std::to_string(i));
    }
  }
}

bool Bounds::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

std::vector<double> Bounds::from_unit(std::span<const double> u) const {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = lower[i] + u[i] * (upper[i] - lower[i]);
  return x;
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::max_evals: return "max_evals";
    case Termination::max_iters: return "max_iters";
    case Termination::stalled: return "stalled";
  }
  return "?";
}

Termination check_termination(const Progress& p, const Criteria& c) {
  if (p.evaluations >= c.max_evals) return Termination::max_evals;
  if (p.iterations >= c.max_iters) return Termination::max_iters;
  if (c.stall_tol > 0.0 && c.stall_window > 0 && p.best_history.size() > static_cast<std::size_t>(c.stall_window)) {
    const double cur = p.best_history.back();
    const double prev = p.best_history[p.best_history.size() - 1 - static_cast<std::size_t>(c.stall_window)];
    if (!std::isfinite(prev)) return std::isfinite(cur) ? Termination::none : Termination::stalled;
    const double rel = (prev - cur) / std::max(std::abs(prev), std::numeric_limits<double>::min());
    if (rel < c.stall_tol) return Termination::stalled;
  }
  return Termination::none;
}

// ---------------------------------------------------------------- shared

namespace {

Evaluation evaluate(const Objective& f, std::vector<double> x) {
  Evaluation e;
  e.f = f(x);
  e.x = std::move(x);
  if (!std::isfinite(e.f)) {
    e.f = std::numeric_limits<double>::infinity();
    e.non_finite = true;
  }
  return e;
}

std::vector<Evaluation> evaluate_all(const Objective& f, std::vector<std::vector<double>> points, bool parallel) {
  std::vector<Evaluation> out(points.size());
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = evaluate(f, std::move(points[static_cast<std::size_t>(i)]));
  return out;
}

void record(RunReport& report, const Evaluation& e) {
  report.log.push_back(e);
  ++report.evaluations;
  if (e.f < report.best_f || report.best_x.empty()) {
    report.best_f = e.f;
    report.best_x = e.x;
  }
}

Progress progress_of(const RunReport& r) { return {r.iterations, r.evaluations, r.best_history}; }

}  // namespace

// ---------------------------------------------------------------- DIRECT

std::vector<double> HyperRect::side_lengths() const {
  std::vector<double> s(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) s[i] = std::pow(3.0, -levels[i]);
  return s;
}

double HyperRect::volume() const {
  double v = 1.0;
  for (int k : levels) v *= std::pow(3.0, -k);
  return v;
}

double HyperRect::size() const {
  // Summed in sorted order so equal level multisets give identical sizes.
  std::vector<int> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (int k : sorted) s += std::pow(9.0, -k);
  return 0.5 * std::sqrt(s);
}

namespace {

// Indices of potentially optimal rectangles, in increasing size.
std::vector<std::size_t> potentially_optimal(const std::vector<HyperRect>& rects, double epsilon) {
  struct Group {
    double d;
    std::size_t best;
  };
  std::map<double, std::size_t> by_size;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const double d = rects[i].size();
    auto [it, inserted] = by_size.emplace(d, i);
    if (!inserted && rects[i].f < rects[it->second].f) it->second = i;
  }
  std::vector<Group> groups;
  for (const auto& [d, i] : by_size) groups.push_back({d, i});

  std::vector<double> finite;
  for (const auto& r : rects) {
    if (std::isfinite(r.f)) finite.push_back(r.f);
  }
  if (finite.empty()) return {groups.back().best};
  std::sort(finite.begin(), finite.end());
  const double f_min = finite.front();
  // Scale for the improvement condition: distance from the best value to the
  // median centre value. Unlike |f_min| this is unchanged by shifting f.
  const double spread = finite[finite.size() / 2] - f_min;
  const double target = f_min - epsilon * spread;

  std::vector<std::size_t> selected;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double fg = rects[groups[g].best].f;
    if (!std::isfinite(fg)) continue;
    const double dg = groups[g].d;
    double k_lo = 0.0;
    for (std::size_t h = 0; h < g; ++h) {
      k_lo = std::max(k_lo, (fg - rects[groups[h].best].f) / (dg - groups[h].d));
    }
    double k_hi = std::numeric_limits<double>::infinity();
    for (std::size_t h = g + 1; h < groups.size(); ++h) {
      k_hi = std::min(k_hi, (rects[groups[h].best].f - fg) / (groups[h].d - dg));
    }
    if (k_lo > k_hi) continue;
    if (std::isfinite(k_hi) && fg - k_hi * dg > target) continue;
    selected.push_back(groups[g].best);
  }
  if (selected.empty()) selected.push_back(groups.back().best);
  return selected;
}

}  // namespace

RunReport direct_minimize(const Objective& f, const Bounds& bounds, const Criteria& criteria,
                          const DirectOptions& options) {
  bounds.validate();
  if (criteria.max_evals < 1) throw std::invalid_argument("direct: max_evals must be at least 1");
  const std::size_t n = bounds.dim();
  RunReport report;

  std::vector<HyperRect> rects(1);
  rects[0].center.assign(n, 0.5);
  rects[0].levels.assign(n, 0);
  {
    const Evaluation e = evaluate(f, bounds.from_unit(rects[0].center));
    rects[0].f = e.f;
    record(report, e);
  }
  report.best_history.push_back(report.best_f);
  if (options.on_iteration) options.on_iteration(0, rects);

  while (true) {
    report.reason = check_termination(progress_of(report), criteria);
    if (report.reason != Termination::none) break;

    const auto selected = potentially_optimal(rects, options.epsilon);

    struct Job {
      std::size_t rect;
      std::vector<std::size_t> dims;
      std::size_t first_point;
    };
    std::vector<Job> jobs;
    std::vector<std::vector<double>> points;
    for (const std::size_t r : selected) {
      const auto& rect = rects[r];
      const int k_min = *std::min_element(rect.levels.begin(), rect.levels.end());
      Job job{r, {}, points.size()};
      for (std::size_t i = 0; i < n; ++i) {
        if (rect.levels[i] == k_min) job.dims.push_back(i);
      }
      if (report.evaluations + static_cast<long>(points.size() + 2 * job.dims.size()) > criteria.max_evals) break;
      const double delta = std::pow(3.0, -(k_min + 1));
      for (const std::size_t i : job.dims) {
        for (const double sign : {1.0, -1.0}) {
          auto c = rect.center;
          c[i] += sign * delta;
          points.push_back(std::move(c));
        }
      }
      jobs.push_back(std::move(job));
    }
    if (jobs.empty()) {
      report.reason = Termination::max_evals;
      break;
    }

    std::vector<std::vector<double>> xs;
    xs.reserve(points.size());
    for (const auto& u : points) xs.push_back(bounds.from_unit(u));
    const auto evals = evaluate_all(f, std::move(xs), options.parallel);
    for (const auto& e : evals) record(report, e);

    for (const Job& job : jobs) {
      // Best child value per dimension decides the splitting order.
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t q = 0; q < job.dims.size(); ++q) {
        const double w = std::min(evals[job.first_point + 2 * q].f, evals[job.first_point + 2 * q + 1].f);
        order.emplace_back(w, q);
      }
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<int> levels = rects[job.rect].levels;
      for (const auto& [w, q] : order) {
        levels[job.dims[q]] += 1;
        for (int s = 0; s < 2; ++s) {
          const std::size_t p = job.first_point + 2 * q + static_cast<std::size_t>(s);
          rects.push_back({points[p], levels, evals[p].f});
        }
      }
      rects[job.rect].levels = levels;
    }

    ++report.iterations;
    report.best_history.push_back(report.best_f);
    if (options.on_iteration) options.on_iteration(report.iterations, rects);
  }
  return report;
}

// ---------------------------------------------------------------- SOGA

RunReport soga_minimize(const Objective& f, const Bounds& bounds, const Criteria& criteria, const SogaOptions& options) {
  bounds.validate();
  if (options.pop_size < 2) throw std::invalid_argument("soga: population size must be at least 2");
  if (options.tournament < 1) throw std::invalid_argument("soga: tournament size must be positive");
  const std::size_t n = bounds.dim();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RunReport report;

  auto uniform_gene = [&](std::size_t i) { return bounds.lower[i] + unit(rng) * (bounds.upper[i] - bounds.lower[i]); };
  auto clip = [&](double v, std::size_t i) { return std::clamp(v, bounds.lower[i], bounds.upper[i]); };

  std::vector<Genome> pop(options.pop_size);
  {
    if (static_cast<long>(options.pop_size) > criteria.max_evals) {
      throw std::invalid_argument("soga: max_evals smaller than the initial population");
    }
    std::vector<std::vector<double>> xs;
    for (auto& g : pop) {
      g.genes.resize(n);
      for (std::size_t i = 0; i < n; ++i) g.genes[i] = uniform_gene(i);
      xs.push_back(g.genes);
    }
    const auto evals = evaluate_all(f, std::move(xs), options.parallel);
    for (std::size_t k = 0; k < pop.size(); ++k) {
      pop[k].fitness = evals[k].f;
      record(report, evals[k]);
    }
  }
  report.best_history.push_back(report.best_f);
  if (options.on_generation) options.on_generation(0, pop);

  auto tournament = [&]() -> const Genome& {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng);
    for (int t = 1; t < options.tournament; ++t) {
      const std::size_t c = pick(rng);
      if (pop[c].fitness < pop[best].fitness || (pop[c].fitness == pop[best].fitness && c < best)) best = c;
    }
    return pop[best];
  };
  auto mutate = [&](Genome& g) {
    for (std::size_t i = 0; i < n; ++i) {
      if (unit(rng) >= options.mutation_rate) continue;
      if (unit(rng) < 0.5) {
        g.genes[i] = clip(g.genes[i] + options.perturb_sigma * (bounds.upper[i] - bounds.lower[i]) * gauss(rng), i);
      } else {
        g.genes[i] = uniform_gene(i);
      }
    }
  };

  while (true) {
    report.reason = check_termination(progress_of(report), criteria);
    if (report.reason != Termination::none) break;
    if (report.evaluations + static_cast<long>(options.pop_size) - 1 > criteria.max_evals) {
      report.reason = Termination::max_evals;
      break;
    }

    std::size_t elite = 0;
    for (std::size_t k = 1; k < pop.size(); ++k) {
      if (pop[k].fitness < pop[elite].fitness) elite = k;
    }
    std::vector<Genome> next{pop[elite]};
    while (next.size() < options.pop_size) {
      Genome a = tournament();
      Genome b = tournament();
      if (unit(rng) < options.crossover_rate) {
        for (std::size_t i = 0; i < n; ++i) {
          const double lo = std::min(a.genes[i], b.genes[i]);
          const double hi = std::max(a.genes[i], b.genes[i]);
          const double ext = options.blend_alpha * (hi - lo);
          std::uniform_real_distribution<double> blend(lo - ext, hi + ext);
          a.genes[i] = clip(blend(rng), i);
          b.genes[i] = clip(blend(rng), i);
        }
      }
      mutate(a);
      mutate(b);
      next.push_back(std::move(a));
      if (next.size() < options.pop_size) next.push_back(std::move(b));
    }

    std::vector<std::vector<double>> xs;
    for (std::size_t k = 1; k < next.size(); ++k) xs.push_back(next[k].genes);
    const auto evals = evaluate_all(f, std::move(xs), options.parallel);
    for (std::size_t k = 1; k < next.size(); ++k) {
      next[k].fitness = evals[k - 1].f;
      record(report, evals[k - 1]);
    }
    pop = std::move(next);
    ++report.iterations;
    report.best_history.push_back(report.best_f);
    if (options.on_generation) options.on_generation(report.iterations, pop);
  }
  return report;
}

// ---------------------------------------------------------------- output

void write_eval_log(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  const std::size_t n = report.log.empty() ? report.best_x.size() : report.log.front().x.size();
  out << "eval_index";
  for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",f\n";
  for (std::size_t k = 0; k < report.log.size(); ++k) {
    out << k + 1;
    for (double v : report.log[k].x) out << ',' << v;
    out << ',' << report.log[k].f << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_summary(const RunReport& report, const std::filesystem::path& log_path, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  std::size_t non_finite = 0;
  for (const auto& e : report.log) non_finite += e.non_finite;
  out << "best_f = " << report.best_f << '\n' << "best_x =";
  for (double v : report.best_x) out << ' ' << v;
  out << '\n'
      << "evaluations = " << report.evaluations << '\n'
      << "iterations = " << report.iterations << '\n'
      << "termination = " << termination_name(report.reason) << '\n'
      << "non_finite_evaluations = " << non_finite << '\n'
      << "eval_log = " << log_path.string() << '\n';
}

}  // namespace lf::opt
