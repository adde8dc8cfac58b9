#pragma once

// Divergence between histograms over codebook codes: cost matrix with
// co-occurrence weighting, unbalanced Sinkhorn iteration, debiased
// divergence, and the rescaled alignment score.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "core/types.hpp"

namespace valign {

struct MetricConfig {
  double epsilon = 0.01;      // entropic regularization
  double gamma = 0.5;         // marginal relaxation
  double eps2 = 1e-8;         // co-occurrence denominator guard
  int sinkhorn_max_iters = 1000;
  double eps0 = 1e-12;        // relative-change denominator guard
  double eps1 = 1e-6;         // convergence tolerance
};

struct CostMatrix {
  Eigen::MatrixXd D;  // symmetric, zero diagonal, non-negative
};

struct TransportPlan {
  Eigen::MatrixXd pi;
  bool converged = false;
  int iters_used = 0;
};

struct AlignmentResult {
  double d_uot = 0.0;
  double r = 0.0;          // (0.1 - d_uot) * 10
  double r_display = 0.0;  // 100 * r
  TransportPlan plan;
};

// D_ij = rho(c_i, c_j) * (1 - E[min(a_i(x), a_j(x))] / (E[max(...)] + eps2))
// with rho the cosine distance between centroids and expectations taken over
// the reference corpus's per-document code distributions.
CostMatrix cost_matrix(const Codebook& codebook,
                       const std::vector<std::vector<double>>& reference_doc_dists,
                       const MetricConfig& cfg);

// Scaling iteration u <- (a/(Kv))^(g/(g+e)), v <- (b/(K^T u))^(g/(g+e)) from
// u = v = 1; falls back to log-domain arithmetic when the kernel underflows.
TransportPlan unbalanced_sinkhorn(const ValueHistogram& a, const ValueHistogram& b,
                                  const CostMatrix& cost, const MetricConfig& cfg);

// sum_ij [ D_ij pi_ij + e pi_ij (log pi_ij - 1) ] + g KL(pi 1 || a)
//                                                 + g KL(pi^T 1 || b)
// Generalized KL: KL(u||w) = sum u log(u/w) - u + w, with 0 log 0 = 0.
double uot_objective(const Eigen::MatrixXd& pi, std::span<const double> a,
                     std::span<const double> b, const CostMatrix& cost, const MetricConfig& cfg);

// D(a,b) - D(a,a)/2 - D(b,b)/2, all three solves sharing one cost matrix.
double debiased_uot(const ValueHistogram& a, const ValueHistogram& b, const CostMatrix& cost,
                    const MetricConfig& cfg);

// r = (0.1 - d_uot) * 10; r_display = 100 r.
AlignmentResult alignment_score(double d_uot);

}  // namespace valign
