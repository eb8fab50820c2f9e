#pragma once

// Bound-constrained derivative-free minimization: DIRECT and a real-coded
// single-objective genetic algorithm.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lf::opt {

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  void validate() const;
  bool contains(std::span<const double> x) const;
  /// Unit-cube coordinates to the box.
  std::vector<double> from_unit(std::span<const double> u) const;
};

using Objective = std::function<double(std::span<const double>)>;

struct Evaluation {
  std::vector<double> x;
  double f = 0.0;          // +inf when the objective returned a non-finite value
  bool non_finite = false;
};

enum class Termination { none, max_evals, max_iters, stalled };
std::string_view termination_name(Termination t);

struct Criteria {
  long max_iters = 1000;
  long max_evals = std::numeric_limits<long>::max();
  int stall_window = 20;
  /// Relative decrease of the best value over stall_window iterations below
  /// which the run counts as stalled. <= 0 disables the check.
  double stall_tol = 1e-4;
};

struct Progress {
  long iterations = 0;
  long evaluations = 0;
  std::vector<double> best_history;  // best value after each iteration
};

/// First satisfied criterion, checked in the order max_evals, max_iters,
/// stalled; Termination::none when the run should continue.
Termination check_termination(const Progress& p, const Criteria& c);

struct RunReport {
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  long iterations = 0;
  Termination reason = Termination::none;
  std::vector<Evaluation> log;
  std::vector<double> best_history;
};

/// Cell of the DIRECT partition in unit-cube coordinates. Side i has length
/// 3^-levels[i].
struct HyperRect {
  std::vector<double> center;
  std::vector<int> levels;
  double f = 0.0;

  std::vector<double> side_lengths() const;
  double volume() const;
  /// Half the diagonal.
  double size() const;
};

struct DirectOptions {
  double epsilon = 1e-4;
  bool parallel = false;  // evaluate the new centers of one iteration concurrently
  std::function<void(long iteration, std::span<const HyperRect>)> on_iteration;
};

RunReport direct_minimize(const Objective& f, const Bounds& bounds, const Criteria& criteria,
                          const DirectOptions& options = {});

struct Genome {
  std::vector<double> genes;
  double fitness = std::numeric_limits<double>::infinity();
};

struct SogaOptions {
  std::size_t pop_size = 50;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  double blend_alpha = 0.5;
  double perturb_sigma = 0.1;  // fraction of the bound width
  int tournament = 2;
  std::uint64_t seed = 1;
  bool parallel = false;
  std::function<void(long generation, std::span<const Genome>)> on_generation;
};

RunReport soga_minimize(const Objective& f, const Bounds& bounds, const Criteria& criteria,
                        const SogaOptions& options = {});

/// CSV "eval_index,x_1,...,x_n,f".
void write_eval_log(const RunReport& report, const std::filesystem::path& path);
/// Plain-text summary referencing the log file.
void write_summary(const RunReport& report, const std::filesystem::path& log_path, const std::filesystem::path& path);

}  // namespace lf::opt
