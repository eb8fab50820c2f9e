#include "lf/latentlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace lf::latent {

namespace {

void require_same_dim(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": latent dimensions differ (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
}

// Knuth's error-free sum: s + err == a + b exactly.
double two_sum(double a, double b, double& err) {
  const double s = a + b;
  const double bv = s - a;
  err = (a - (s - bv)) + (b - bv);
  return s;
}

}  // namespace

Eigen::VectorXd interpolate(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int N, int n) {
  require_same_dim(z_a, z_b, "interpolate");
  if (N < 0) throw std::invalid_argument("interpolate: N must be non-negative");
  if (n < 0 || n > N + 1) {
    throw std::out_of_range("interpolate: index " + std::to_string(n) + " outside [0, " + std::to_string(N + 1) + "]");
  }
  if (n == 0) return z_a;
  if (n == N + 1) return z_b;
  return z_a + (z_b - z_a) / static_cast<double>(N + 1) * static_cast<double>(n);
}

Eigen::VectorXd arithmetic(const Eigen::VectorXd& z_deformed, const Eigen::VectorXd& z_base,
                           const Eigen::VectorXd& z_target) {
  require_same_dim(z_deformed, z_base, "arithmetic");
  require_same_dim(z_deformed, z_target, "arithmetic");
  // Compensated so d - b + b == d and b - b + t == t hold bit for bit.
  Eigen::VectorXd out(z_deformed.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double e1 = 0.0, e2 = 0.0;
    const double s1 = two_sum(z_deformed[i], -z_base[i], e1);
    const double s2 = two_sum(s1, z_target[i], e2);
    out[i] = s2 + (e1 + e2);
  }
  return out;
}

void TsneConfig::validate() const {
  if (!(perplexity >= 1.0)) throw std::invalid_argument("tsne: perplexity must be at least 1");
  if (iterations < 1 || exaggeration_iters < 0) throw std::invalid_argument("tsne: bad iteration counts");
  if (!(learning_rate > 0.0) || !(exaggeration >= 1.0)) throw std::invalid_argument("tsne: bad step parameters");
}

double default_perplexity(std::size_t n) {
  return std::max(1.0, std::min(30.0, static_cast<double>(n) / 4.0));
}

namespace {

// Bisection on beta for one row; writes p_{j|i} into row and returns
// (beta, entropy).
std::pair<double, double> fit_row(const Eigen::MatrixXd& points, Eigen::Index i, double target,
                                  Eigen::RowVectorXd& row) {
  const Eigen::Index n = points.rows();
  row.resize(n);
  Eigen::RowVectorXd d(n);
  double d_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = (points.row(i) - points.row(j)).squaredNorm();
    if (j != i) d_min = std::min(d_min, d[j]);
  }
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double entropy = 0.0;
  for (int it = 0; it < 200; ++it) {
    double sum = 0.0, weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) {
        row[j] = 0.0;
        continue;
      }
      const double shifted = d[j] - d_min;
      row[j] = std::exp(-beta * shifted);
      sum += row[j];
      weighted += shifted * row[j];
    }
    entropy = std::log(sum) + beta * weighted / sum;
    row /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-10) break;
    if (diff > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  return {beta, entropy};
}

ConditionalAffinities check_and_allocate(const Eigen::MatrixXd& points, double perplexity) {
  const Eigen::Index n = points.rows();
  if (n < 3) throw std::invalid_argument("tsne: need at least 3 points");
  if (!(perplexity >= 1.0) || perplexity >= static_cast<double>(n)) {
    throw std::invalid_argument("tsne: perplexity " + std::to_string(perplexity) + " must be in [1, point count " +
                                std::to_string(n) + ")");
  }
  ConditionalAffinities c;
  c.P = Eigen::MatrixXd::Zero(n, n);
  c.beta.assign(static_cast<std::size_t>(n), 0.0);
  c.entropy.assign(static_cast<std::size_t>(n), 0.0);
  return c;
}

}  // namespace

ConditionalAffinities conditional_affinities(const Eigen::MatrixXd& points, double perplexity) {
  ConditionalAffinities c = check_and_allocate(points, perplexity);
  const double target = std::log(perplexity);
  // Rows are independent; each thread writes its own row.
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::RowVectorXd row;
    const auto [beta, h] = fit_row(points, i, target, row);
    c.P.row(i) = row;
    c.beta[static_cast<std::size_t>(i)] = beta;
    c.entropy[static_cast<std::size_t>(i)] = h;
  }
  return c;
}

ConditionalAffinities conditional_affinities_serial(const Eigen::MatrixXd& points, double perplexity) {
  ConditionalAffinities c = check_and_allocate(points, perplexity);
  const double target = std::log(perplexity);
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto [beta, h] = fit_row(points, i, target, row);
    c.P.row(i) = row;
    c.beta[static_cast<std::size_t>(i)] = beta;
    c.entropy[static_cast<std::size_t>(i)] = h;
  }
  return c;
}

Eigen::MatrixXd joint_affinities(const ConditionalAffinities& cond) {
  const auto n = static_cast<double>(cond.P.rows());
  Eigen::MatrixXd P = (cond.P + cond.P.transpose()) / (2.0 * n);
  return P;
}

namespace {

// Student-t kernel 1 / (1 + |y_i - y_j|^2) with zero diagonal; returns its sum.
double student_t(const Eigen::MatrixXd& Y, Eigen::MatrixXd& num) {
  const Eigen::Index n = Y.rows();
  num.resize(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
      num(i, j) = v;
      num(j, i) = v;
      z += 2.0 * v;
    }
  }
  return z;
}

double kl_from(const Eigen::MatrixXd& P, const Eigen::MatrixXd& num, double z) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double p = P(i, j);
      if (i == j || p <= 0.0) continue;
      const double q = std::max(num(i, j) / z, std::numeric_limits<double>::min());
      kl += p * std::log(p / q);
    }
  }
  return kl;
}

}  // namespace

double kl_divergence(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y) {
  if (P.rows() != Y.rows() || P.cols() != P.rows()) throw std::invalid_argument("kl_divergence: shape mismatch");
  Eigen::MatrixXd num;
  const double z = student_t(Y, num);
  return kl_from(P, num, z);
}

Embedding2D tsne_embed(const Eigen::MatrixXd& points, std::vector<std::string> labels, const TsneConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = points.rows();
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("tsne: label count does not match point count");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Exact duplicates make rows of P degenerate; nudge repeats apart.
  Eigen::MatrixXd X = points;
  Embedding2D emb;
  std::set<std::vector<double>> seen;
  const double scale = n > 0 ? std::max(1.0, X.cwiseAbs().maxCoeff()) : 1.0;
  std::vector<Eigen::Index> repeats;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> key;
    for (Eigen::Index k = 0; k < X.cols(); ++k) key.push_back(X(i, k));
    if (!seen.insert(key).second) repeats.push_back(i);
  }
  if (seen.size() < 3) throw std::invalid_argument("tsne: need at least 3 distinct points");
  for (const Eigen::Index i : repeats) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) X(i, k) += 1e-6 * scale * gauss(rng);
  }
  emb.jittered = repeats.size();

  const Eigen::MatrixXd P = joint_affinities(conditional_affinities(X, cfg.perplexity));

  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    Y(i, 0) = 1e-4 * gauss(rng);
    Y(i, 1) = 1e-4 * gauss(rng);
  }
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  Eigen::MatrixXd num;

  for (int it = 0; it < cfg.iterations; ++it) {
    const bool exaggerate = it < cfg.exaggeration_iters;
    const double ex = exaggerate ? cfg.exaggeration : 1.0;
    const double momentum = exaggerate ? cfg.momentum : cfg.final_momentum;
    const double z = student_t(Y, num);
    emb.kl.push_back(kl_from(P, num, z));

    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (ex * P(i, j) - num(i, j) / z) * num(i, j);
        grad.row(i) += 4.0 * w * (Y.row(i) - Y.row(j));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        const bool same = (grad(i, k) > 0.0) == (update(i, k) > 0.0);
        gains(i, k) = same ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
        update(i, k) = momentum * update(i, k) - cfg.learning_rate * gains(i, k) * grad(i, k);
      }
    }
    Y += update;
    Y.rowwise() -= Y.colwise().mean();
  }

  emb.points.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) emb.points.emplace_back(Y(i, 0), Y(i, 1));
  emb.labels = std::move(labels);
  return emb;
}

std::string base_label(const std::string& shape_id) {
  return shape_id.substr(0, shape_id.find('-'));
}

void write_embedding(const Embedding2D& emb, const std::vector<std::string>& ids, const std::filesystem::path& csv) {
  if (ids.size() != emb.points.size()) throw std::invalid_argument("write_embedding: id count mismatch");
  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot open " + csv.string() + " for writing");
  out.precision(17);
  out << "id,base_label,x,y\n";
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string label = emb.labels.empty() ? base_label(ids[i]) : emb.labels[i];
    if (std::find(groups.begin(), groups.end(), label) == groups.end()) groups.push_back(label);
    out << ids[i] << ',' << label << ',' << emb.points[i].x() << ',' << emb.points[i].y() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + csv.string());

  auto gp_path = csv;
  gp_path.replace_extension(".gp");
  std::ofstream gp(gp_path);
  if (!gp) throw std::runtime_error("cannot open " + gp_path.string() + " for writing");
  gp << "# gnuplot " << gp_path.filename().string() << "\n"
     << "set datafile separator ','\n"
     << "set key outside right\n"
     << "set size ratio -1\n"
     << "labels = \"";
  for (std::size_t g = 0; g < groups.size(); ++g) gp << (g ? " " : "") << groups[g];
  gp << "\"\n"
     << "plot for [lbl in labels] '" << csv.filename().string()
     << "' every ::1 using (strcol(2) eq lbl ? $3 : 1/0):4 with points pt 7 ps 0.8 title lbl\n";
}

}  // namespace lf::latent
