#include "uot/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/math.hpp"

namespace valign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_histogram(const ValueHistogram& h, const char* which, std::size_t k) {
  if (h.mass.size() != k)
    throw Error(ErrorCode::invalid_argument,
                std::string("unbalanced_sinkhorn: histogram ") + which + " has wrong length");
  if (!is_distribution(h.mass))
    throw Error(ErrorCode::invalid_argument,
                std::string("unbalanced_sinkhorn: histogram ") + which + " is not a distribution");
}

void check_config(const MetricConfig& cfg) {
  if (cfg.epsilon <= 0 || cfg.gamma <= 0 || cfg.eps2 <= 0 || cfg.eps0 <= 0 || cfg.eps1 <= 0 ||
      cfg.sinkhorn_max_iters < 1)
    throw Error(ErrorCode::invalid_argument, "metric config: all parameters must be positive");
}

// Plain-domain scaling iteration. Returns false when the kernel underflows
// and the caller should switch to log-domain arithmetic.
bool sinkhorn_plain(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                    const Eigen::MatrixXd& kernel, const MetricConfig& cfg, TransportPlan& out) {
  const auto k = a.size();
  const double phi = cfg.gamma / (cfg.gamma + cfg.epsilon);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(k), v = Eigen::VectorXd::Ones(k);
  bool converged = false;
  int t = 0;
  while (t < cfg.sinkhorn_max_iters) {
    ++t;
    Eigen::VectorXd u_prev = u, v_prev = v;
    Eigen::VectorXd kv = kernel * v;
    for (Eigen::Index i = 0; i < k; ++i) {
      u[i] = a[i] > 0 ? std::pow(a[i] / kv[i], phi) : 0.0;
      if (!std::isfinite(u[i])) return false;
    }
    Eigen::VectorXd ktu = kernel.transpose() * u;
    for (Eigen::Index j = 0; j < k; ++j) {
      v[j] = b[j] > 0 ? std::pow(b[j] / ktu[j], phi) : 0.0;
      if (!std::isfinite(v[j])) return false;
    }
    double du = (u - u_prev).cwiseAbs().maxCoeff() / (u_prev.cwiseAbs().maxCoeff() + cfg.eps0);
    double dv = (v - v_prev).cwiseAbs().maxCoeff() / (v_prev.cwiseAbs().maxCoeff() + cfg.eps0);
    if (std::max(du, dv) <= cfg.eps1) {
      converged = true;
      break;
    }
  }
  out.pi = u.asDiagonal() * kernel * v.asDiagonal();
  out.converged = converged;
  out.iters_used = t;
  return true;
}

// Log-domain variant for kernels that underflow. The stopping rule mirrors
// the plain one (sup-norm change over the sup-norm of the previous iterate),
// evaluated on max-shifted exponentials so nothing overflows.
void sinkhorn_log(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& cost, const MetricConfig& cfg, TransportPlan& out) {
  const auto k = a.size();
  const double phi = cfg.gamma / (cfg.gamma + cfg.epsilon);
  Eigen::MatrixXd neg_scaled = -cost / cfg.epsilon;
  Eigen::VectorXd la(k), lb(k);
  for (Eigen::Index i = 0; i < k; ++i) la[i] = a[i] > 0 ? std::log(a[i]) : -kInf;
  for (Eigen::Index j = 0; j < k; ++j) lb[j] = b[j] > 0 ? std::log(b[j]) : -kInf;

  auto lse_row = [&](const Eigen::VectorXd& lv, Eigen::Index i) {
    double m = -kInf;
    for (Eigen::Index j = 0; j < k; ++j) m = std::max(m, neg_scaled(i, j) + lv[j]);
    if (m == -kInf) return -kInf;
    double s = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double e = neg_scaled(i, j) + lv[j];
      if (e > -kInf) s += std::exp(e - m);
    }
    return m + std::log(s);
  };
  auto lse_col = [&](const Eigen::VectorXd& lu, Eigen::Index j) {
    double m = -kInf;
    for (Eigen::Index i = 0; i < k; ++i) m = std::max(m, neg_scaled(i, j) + lu[i]);
    if (m == -kInf) return -kInf;
    double s = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      double e = neg_scaled(i, j) + lu[i];
      if (e > -kInf) s += std::exp(e - m);
    }
    return m + std::log(s);
  };

  Eigen::VectorXd lu = Eigen::VectorXd::Zero(k), lv = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i)
    if (a[i] <= 0) lu[i] = -kInf;
  for (Eigen::Index j = 0; j < k; ++j)
    if (b[j] <= 0) lv[j] = -kInf;

  // ||exp(x) - exp(x_prev)||_inf / (||exp(x_prev)||_inf + eps0), computed on
  // exponentials shifted by max(x_prev) so large scalings stay finite.
  auto shifted_change = [&](const Eigen::VectorXd& prev, const Eigen::VectorXd& next) {
    double m = prev.maxCoeff();
    if (m == -kInf) m = next.maxCoeff();
    if (m == -kInf) return 0.0;
    double diff = 0.0, prev_max = 0.0;
    for (Eigen::Index i = 0; i < prev.size(); ++i) {
      double p = prev[i] == -kInf ? 0.0 : std::exp(prev[i] - m);
      double n = next[i] == -kInf ? 0.0 : std::exp(next[i] - m);
      diff = std::max(diff, std::abs(n - p));
      prev_max = std::max(prev_max, p);
    }
    return diff / (prev_max + cfg.eps0);
  };

  bool converged = false;
  int t = 0;
  while (t < cfg.sinkhorn_max_iters) {
    ++t;
    Eigen::VectorXd lu_prev = lu, lv_prev = lv;
    for (Eigen::Index i = 0; i < k; ++i)
      lu[i] = a[i] > 0 ? phi * (la[i] - lse_row(lv, i)) : -kInf;
    for (Eigen::Index j = 0; j < k; ++j)
      lv[j] = b[j] > 0 ? phi * (lb[j] - lse_col(lu, j)) : -kInf;
    double change = std::max(shifted_change(lu_prev, lu), shifted_change(lv_prev, lv));
    if (change <= cfg.eps1) {
      converged = true;
      break;
    }
  }

  out.pi.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      double e = lu[i] + neg_scaled(i, j) + lv[j];
      out.pi(i, j) = e == -kInf ? 0.0 : std::exp(e);
      if (!std::isfinite(out.pi(i, j)))
        throw Error(ErrorCode::degenerate, "kernel degenerate; increase epsilon");
    }
  out.converged = converged;
  out.iters_used = t;
}

}  // namespace

CostMatrix cost_matrix(const Codebook& codebook,
                       const std::vector<std::vector<double>>& reference_doc_dists,
                       const MetricConfig& cfg) {
  check_config(cfg);
  const std::size_t k = codebook.codes.size();
  if (k == 0) throw Error(ErrorCode::invalid_argument, "cost_matrix: empty codebook");
  if (reference_doc_dists.empty())
    throw Error(ErrorCode::invalid_argument, "cost_matrix: no reference documents");
  for (const auto& d : reference_doc_dists)
    if (d.size() != k)
      throw Error(ErrorCode::invalid_argument, "cost_matrix: distribution length mismatch");

  const double n = static_cast<double>(reference_doc_dists.size());
  CostMatrix out;
  out.D = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double rho =
          1.0 - cosine_similarity(codebook.codes[i].centroid, codebook.codes[j].centroid);
      double e_min = 0.0, e_max = 0.0;
      for (const auto& d : reference_doc_dists) {
        e_min += std::min(d[i], d[j]);
        e_max += std::max(d[i], d[j]);
      }
      e_min /= n;
      e_max /= n;
      double w = 1.0 - e_min / (e_max + cfg.eps2);
      double v = std::max(0.0, rho * w);
      out.D(i, j) = v;
      out.D(j, i) = v;
    }
  }
  return out;
}

TransportPlan unbalanced_sinkhorn(const ValueHistogram& a, const ValueHistogram& b,
                                  const CostMatrix& cost, const MetricConfig& cfg) {
  check_config(cfg);
  const std::size_t k = cost.D.rows();
  if (cost.D.cols() != static_cast<Eigen::Index>(k))
    throw Error(ErrorCode::invalid_argument, "unbalanced_sinkhorn: cost matrix not square");
  check_histogram(a, "a", k);
  check_histogram(b, "b", k);

  Eigen::VectorXd av(k), bv(k);
  for (std::size_t i = 0; i < k; ++i) {
    av[i] = a.mass[i];
    bv[i] = b.mass[i];
  }

  TransportPlan plan;
  Eigen::MatrixXd kernel = (-cost.D / cfg.epsilon).array().exp();
  if (!sinkhorn_plain(av, bv, kernel, cfg, plan)) {
    sinkhorn_log(av, bv, cost.D, cfg, plan);
  }
  return plan;
}

double uot_objective(const Eigen::MatrixXd& pi, std::span<const double> a,
                     std::span<const double> b, const CostMatrix& cost, const MetricConfig& cfg) {
  check_config(cfg);
  const auto k = cost.D.rows();
  if (pi.rows() != k || pi.cols() != k || static_cast<Eigen::Index>(a.size()) != k ||
      static_cast<Eigen::Index>(b.size()) != k)
    throw Error(ErrorCode::invalid_argument, "uot_objective: shape mismatch");

  double transport = 0.0, entropic = 0.0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      double p = pi(i, j);
      if (p < 0)
        throw Error(ErrorCode::invalid_argument, "uot_objective: negative plan entry");
      transport += cost.D(i, j) * p;
      if (p > 0) entropic += p * (std::log(p) - 1.0);
    }

  auto generalized_kl = [](const Eigen::VectorXd& u, std::span<const double> w) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u[i] > 0) {
        if (w[i] <= 0)
          throw Error(ErrorCode::invalid_argument,
                      "uot_objective: infeasible plan (mass against zero target)");
        kl += u[i] * std::log(u[i] / w[i]) - u[i] + w[i];
      } else {
        kl += w[i];
      }
    }
    return kl;
  };

  Eigen::VectorXd row = pi.rowwise().sum();
  Eigen::VectorXd col = pi.colwise().sum();
  return transport + cfg.epsilon * entropic + cfg.gamma * generalized_kl(row, a) +
         cfg.gamma * generalized_kl(col, b);
}

double debiased_uot(const ValueHistogram& a, const ValueHistogram& b, const CostMatrix& cost,
                    const MetricConfig& cfg) {
  auto solve = [&](const ValueHistogram& x, const ValueHistogram& y) {
    TransportPlan plan = unbalanced_sinkhorn(x, y, cost, cfg);
    return uot_objective(plan.pi, x.mass, y.mass, cost, cfg);
  };
  return solve(a, b) - 0.5 * solve(a, a) - 0.5 * solve(b, b);
}

AlignmentResult alignment_score(double d_uot) {
  if (!std::isfinite(d_uot))
    throw Error(ErrorCode::invalid_argument, "alignment_score: non-finite divergence");
  AlignmentResult out;
  out.d_uot = d_uot;
  out.r = (0.1 - d_uot) * 10.0;
  out.r_display = 100.0 * out.r;
  return out;
}

}  // namespace valign
