#include "codebook/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/error.hpp"

namespace valign {

Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& rows, int target_dim) {
  const auto n = rows.rows();
  const auto d = rows.cols();
  if (d <= target_dim || n < 3) return rows;

  Eigen::RowVectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::internal, "pca_reduce: eigensolver failed");

  // eigenvalues come out ascending; take the trailing target_dim columns
  Eigen::MatrixXd basis = solver.eigenvectors().rightCols(target_dim).rowwise().reverse();
  for (int c = 0; c < basis.cols(); ++c) {
    int arg_max = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg_max);
    if (basis(arg_max, c) < 0) basis.col(c) = -basis.col(c);
  }
  return centered * basis;
}

namespace {

struct MstEdge {
  int a, b;
  double w;
};

// Prim's algorithm on the mutual-reachability graph.
std::vector<MstEdge> mutual_reachability_mst(const Eigen::MatrixXd& dist,
                                             const Eigen::VectorXd& core) {
  const int n = static_cast<int>(dist.rows());
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<int> from(n, -1);
  std::vector<MstEdge> edges;
  edges.reserve(n - 1);

  int current = 0;
  in_tree[0] = true;
  for (int step = 1; step < n; ++step) {
    for (int j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      double mr = std::max({core[current], core[j], dist(current, j)});
      if (mr < best[j]) {
        best[j] = mr;
        from[j] = current;
      }
    }
    int next = -1;
    double next_w = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (!in_tree[j] && best[j] < next_w) {
        next_w = best[j];
        next = j;
      }
    edges.push_back({from[next], next, next_w});
    in_tree[next] = true;
    current = next;
  }
  return edges;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

}  // namespace

DensityClusterResult density_cluster(const Eigen::MatrixXd& points, int min_cluster_size) {
  const int n = static_cast<int>(points.rows());
  DensityClusterResult result;
  result.labels.assign(n, -1);
  if (min_cluster_size < 2)
    throw Error(ErrorCode::invalid_argument, "density_cluster: min_cluster_size must be >= 2");
  if (n < min_cluster_size) return result;  // everything is noise

  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  // core distance: distance to the k-th nearest neighbor (k = min_cluster_size)
  const int k = std::min(min_cluster_size, n - 1);
  Eigen::VectorXd core(n);
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[j] = dist(i, j);
    std::nth_element(row.begin(), row.begin() + k, row.end());
    core[i] = row[k];
  }

  auto edges = mutual_reachability_mst(dist, core);
  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    if (x.w != y.w) return x.w < y.w;
    auto xa = std::minmax(x.a, x.b), ya = std::minmax(y.a, y.b);
    return xa < ya;
  });

  // Single-linkage dendrogram: leaves 0..n-1, internal nodes n..2n-2.
  struct TreeNode {
    int left, right;
    double dist;
    int size;
  };
  std::vector<TreeNode> tree;
  tree.reserve(n - 1);
  std::vector<int> component_node(n);  // union-find root -> current tree node
  std::iota(component_node.begin(), component_node.end(), 0);
  std::vector<int> node_size(2 * n - 1, 1);
  UnionFind uf(n);
  for (const auto& e : edges) {
    int ra = uf.find(e.a), rb = uf.find(e.b);
    int na = component_node[ra], nb = component_node[rb];
    int id = n + static_cast<int>(tree.size());
    tree.push_back({na, nb, e.w, node_size[na] + node_size[nb]});
    node_size[id] = node_size[na] + node_size[nb];
    uf.parent[ra] = rb;
    component_node[uf.find(rb)] = id;
  }

  // Condensed tree walk (iterative): a cluster persists down the big child;
  // small splinters fall out; a split into two big children creates two new
  // clusters and ends the current one.
  struct Cluster {
    double birth_lambda = 0.0;
    double stability = 0.0;
    int parent = -1;
    std::vector<int> children;
  };
  std::vector<Cluster> clusters;
  std::vector<int> fallout_cluster(n, -1);

  auto lambda_of = [](double d) { return 1.0 / std::max(d, 1e-12); };
  auto collect_leaves = [&](int node, std::vector<int>& out) {
    std::vector<int> stack{node};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u < n) {
        out.push_back(u);
      } else {
        stack.push_back(tree[u - n].left);
        stack.push_back(tree[u - n].right);
      }
    }
  };

  int root = 2 * n - 2;
  clusters.push_back({0.0, 0.0, -1, {}});  // root cluster (never selectable)
  std::vector<std::pair<int, int>> walk{{root, 0}};  // (tree node, cluster id)
  while (!walk.empty()) {
    auto [node, cid] = walk.back();
    walk.pop_back();
    if (node < n) {  // singleton component: falls out of cid immediately
      fallout_cluster[node] = cid;
      continue;
    }
    const TreeNode& t = tree[node - n];
    double lam = lambda_of(t.dist);
    int s_left = node_size[t.left], s_right = node_size[t.right];
    bool big_left = s_left >= min_cluster_size, big_right = s_right >= min_cluster_size;
    if (big_left && big_right) {
      clusters[cid].stability += node_size[node] * (lam - clusters[cid].birth_lambda);
      for (int child : {t.left, t.right}) {
        int new_cid = static_cast<int>(clusters.size());
        clusters.push_back({lam, 0.0, cid, {}});
        clusters[cid].children.push_back(new_cid);
        walk.push_back({child, new_cid});
      }
    } else if (big_left || big_right) {
      int big = big_left ? t.left : t.right;
      int small = big_left ? t.right : t.left;
      clusters[cid].stability += node_size[small] * (lam - clusters[cid].birth_lambda);
      std::vector<int> dropped;
      collect_leaves(small, dropped);
      for (int p : dropped) fallout_cluster[p] = cid;
      walk.push_back({big, cid});
    } else {
      clusters[cid].stability += node_size[node] * (lam - clusters[cid].birth_lambda);
      std::vector<int> dropped;
      collect_leaves(node, dropped);
      for (int p : dropped) fallout_cluster[p] = cid;
    }
  }

  // Excess-of-mass selection, children before parents (ids are topological).
  int m = static_cast<int>(clusters.size());
  std::vector<bool> selected(m, false);
  std::vector<double> subtree(m, 0.0);
  for (int cid = m - 1; cid >= 1; --cid) {
    double child_sum = 0.0;
    for (int ch : clusters[cid].children) child_sum += subtree[ch];
    if (clusters[cid].children.empty() || clusters[cid].stability > child_sum) {
      selected[cid] = true;
      subtree[cid] = clusters[cid].stability;
      std::vector<int> stack = clusters[cid].children;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        selected[u] = false;
        stack.insert(stack.end(), clusters[u].children.begin(), clusters[u].children.end());
      }
    } else {
      subtree[cid] = child_sum;
    }
  }
  selected[0] = false;  // the root would swallow everything

  std::vector<int> flat_id(m, -1);
  for (int p = 0; p < n; ++p) {
    int cid = fallout_cluster[p];
    while (cid != -1 && !selected[cid]) cid = clusters[cid].parent;
    if (cid == -1) continue;
    if (flat_id[cid] == -1) flat_id[cid] = result.num_clusters++;
    result.labels[p] = flat_id[cid];
  }
  return result;
}

std::pair<std::vector<int>, std::vector<int>> two_means(const Eigen::MatrixXd& points) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw Error(ErrorCode::invalid_argument, "two_means: need at least 2 points");

  // farthest-pair seeding
  Eigen::RowVectorXd mean = points.colwise().mean();
  int seed_a = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double d = (points.row(i) - mean).norm();
    if (d > best) {
      best = d;
      seed_a = i;
    }
  }
  int seed_b = seed_a == 0 ? 1 : 0;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    double d = (points.row(i) - points.row(seed_a)).norm();
    if (i != seed_a && d > best) {
      best = d;
      seed_b = i;
    }
  }

  Eigen::RowVectorXd c1 = points.row(seed_a), c2 = points.row(seed_b);
  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int a = (points.row(i) - c1).squaredNorm() <= (points.row(i) - c2).squaredNorm() ? 0 : 1;
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    // never let a side go empty
    int n1 = static_cast<int>(std::count(assign.begin(), assign.end(), 0));
    if (n1 == 0 || n1 == n) {
      int donor = -1;
      double far = -1.0;
      const Eigen::RowVectorXd& full_c = n1 == 0 ? c2 : c1;
      for (int i = 0; i < n; ++i) {
        double d = (points.row(i) - full_c).norm();
        if (d > far) {
          far = d;
          donor = i;
        }
      }
      assign[donor] = n1 == 0 ? 0 : 1;
    }
    Eigen::RowVectorXd s1 = Eigen::RowVectorXd::Zero(points.cols());
    Eigen::RowVectorXd s2 = Eigen::RowVectorXd::Zero(points.cols());
    int k1 = 0;
    for (int i = 0; i < n; ++i) {
      if (assign[i] == 0) {
        s1 += points.row(i);
        ++k1;
      } else {
        s2 += points.row(i);
      }
    }
    c1 = s1 / std::max(1, k1);
    c2 = s2 / std::max(1, n - k1);
    if (!changed) break;
  }

  std::pair<std::vector<int>, std::vector<int>> out;
  for (int i = 0; i < n; ++i) (assign[i] == 0 ? out.first : out.second).push_back(i);
  return out;
}

}  // namespace valign
