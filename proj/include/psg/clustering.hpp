#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "psg/common.hpp"
#include "psg/graph.hpp"
#include "psg/matrix.hpp"
#include "psg/rng.hpp"

namespace psg {

struct ClusterAssignment {
  std::vector<std::size_t> labels;  // length N, values in [0, C)
  Matrix<double> centroids;         // C x d
  double inertia = 0;
  std::size_t iterations = 0;
  /// Inertia after seeding and after every Lloyd iteration; non-increasing.
  std::vector<double> inertia_history;
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace detail

/// Lloyd iterations with k-means++ seeding. Ties assign to the lowest
/// centroid index; empty clusters are re-seeded to the point currently
/// farthest from its centroid. Stops when labels stop changing, the largest
/// centroid shift drops below tol, or max_iters is reached. Deterministic
/// under the rng seed.
inline ClusterAssignment kmeans(const Matrix<double>& points, std::size_t C,
                                std::size_t max_iters, double tol, Rng& rng,
                                int workers = 1) {
  std::size_t n = points.rows, d = points.cols;
  if (C < 1) throw ConfigError("kmeans: cluster count must be >= 1");
  if (C > n) throw ConfigError("kmeans: cluster count exceeds point count");
  if (d < 1) throw ConfigError("kmeans: points must have dimension >= 1");
  if (!points.all_finite())
    throw ValidationError("kmeans: non-finite input coordinates");

  ClusterAssignment out;
  out.centroids = Matrix<double>(C, d);

  // k-means++: first centroid uniform, the rest weighted by squared
  // distance to the nearest chosen centroid.
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = std::size_t(rng.uniform_index(n));
  chosen[first] = true;
  for (std::size_t j = 0; j < d; ++j) out.centroids(0, j) = points(first, j);
  for (std::size_t c = 1; c < C; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sq = detail::sq_dist(points.row(i), out.centroids.row(c - 1), d);
      if (sq < min_sq[i]) min_sq[i] = sq;
      if (!chosen[i]) total += min_sq[i];
    }
    std::size_t pick = n;
    if (total > 0) {
      double target = rng.uniform_real() * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        acc += min_sq[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {  // all remaining mass zero: take the first free point
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    for (std::size_t j = 0; j < d; ++j) out.centroids(c, j) = points(pick, j);
  }

  std::vector<std::size_t> labels(n, 0);
  std::vector<double> dist_to_centroid(n, 0);
  auto assign = [&]() {
    parallel_for(n, workers, [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < C; ++c) {
        double sq = detail::sq_dist(points.row(i), out.centroids.row(c), d);
        if (sq < best) {
          best = sq;
          best_c = c;
        }
      }
      labels[i] = best_c;
      dist_to_centroid[i] = best;
    });
    double inertia = 0;
    for (double v : dist_to_centroid) inertia += v;
    return inertia;
  };

  double inertia = assign();
  out.inertia_history.push_back(inertia);

  std::vector<std::size_t> prev_labels;
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    Matrix<double> next(C, d);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < d; ++j) next(labels[i], j) += points(i, j);
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < C; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) next(c, j) /= double(counts[c]);
      } else {
        // Re-seed to the farthest point not already used this round.
        std::size_t far = n;
        double far_d = -1;
        for (std::size_t i = 0; i < n; ++i)
          if (!taken[i] && dist_to_centroid[i] > far_d) {
            far_d = dist_to_centroid[i];
            far = i;
          }
        taken[far] = true;
        for (std::size_t j = 0; j < d; ++j) next(c, j) = points(far, j);
      }
    }
    double shift_sq = 0;
    for (std::size_t c = 0; c < C; ++c)
      shift_sq = std::max(shift_sq,
                          detail::sq_dist(next.row(c), out.centroids.row(c), d));
    out.centroids = std::move(next);

    prev_labels = labels;
    inertia = assign();
    out.inertia_history.push_back(inertia);
    out.iterations = iter;
    if (labels == prev_labels) break;
    if (std::sqrt(shift_sq) < tol) break;
  }

  // Consistency pass: every non-empty cluster's centroid equals the mean of
  // its members, and the reported inertia matches (labels, centroids).
  {
    Matrix<double> means(C, d);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < d; ++j) means(labels[i], j) += points(i, j);
    }
    for (std::size_t c = 0; c < C; ++c) {
      if (counts[c] == 0) {
        for (std::size_t j = 0; j < d; ++j) means(c, j) = out.centroids(c, j);
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) means(c, j) /= double(counts[c]);
    }
    out.centroids = std::move(means);
    double final_inertia = 0;
    for (std::size_t i = 0; i < n; ++i)
      final_inertia +=
          detail::sq_dist(points.row(i), out.centroids.row(labels[i]), d);
    out.inertia = final_inertia;
    out.inertia_history.push_back(final_inertia);
  }
  out.labels = std::move(labels);
  return out;
}

/// Total node -> content label map for training consumption.
inline std::vector<std::size_t> assign_labels(const ClusterAssignment& a,
                                              const Graph& g) {
  if (a.labels.size() != g.num_nodes())
    throw ValidationError("assign_labels: label count " +
                          std::to_string(a.labels.size()) +
                          " does not match graph size " +
                          std::to_string(g.num_nodes()));
  return a.labels;
}

/// Label file: "node_id<TAB>cluster_id" lines, '#' comments ignored.
inline void write_labels(std::ostream& out,
                         const std::vector<std::size_t>& labels,
                         const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << i << "\t" << labels[i] << "\n";
}

inline std::vector<std::size_t> read_labels(std::istream& in,
                                            NodeId num_nodes) {
  std::vector<std::size_t> labels(num_nodes, 0);
  std::vector<bool> seen(num_nodes, false);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    std::istringstream ls(line);
    std::uint64_t id = 0, lab = 0;
    std::string rest;
    if (!(ls >> id >> lab) || (ls >> rest))
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'node_id<TAB>cluster_id'");
    if (id >= num_nodes)
      throw ValidationError("line " + std::to_string(line_no) + ": node id " +
                            std::to_string(id) + " out of range");
    if (seen[id])
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate label for node " + std::to_string(id));
    seen[id] = true;
    labels[id] = std::size_t(lab);
  }
  for (NodeId v = 0; v < num_nodes; ++v)
    if (!seen[v])
      throw ValidationError("label file is missing node " + std::to_string(v));
  return labels;
}

}  // namespace psg
