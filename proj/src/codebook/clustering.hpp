#pragma once

#include <Eigen/Dense>
#include <vector>

namespace valign {

// Centered PCA projection onto the top `target_dim` principal directions.
// Eigenvector signs are canonicalized (largest-magnitude component positive)
// so results are reproducible. Returns the input unchanged when it is
// already at most target_dim wide or has fewer than 3 rows.
Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& rows, int target_dim);

struct DensityClusterResult {
  std::vector<int> labels;  // cluster index per point, -1 = noise
  int num_clusters = 0;
};

// Density clustering in the HDBSCAN family: mutual-reachability MST,
// condensed cluster tree, and stability-based flat extraction. Points in
// splinters smaller than min_cluster_size come back as noise.
DensityClusterResult density_cluster(const Eigen::MatrixXd& points, int min_cluster_size);

// Deterministic 2-means split (farthest-pair initialization). Returns the two
// member index sets; both are non-empty when the input has >= 2 rows.
std::pair<std::vector<int>, std::vector<int>> two_means(const Eigen::MatrixXd& points);

}  // namespace valign
