// Copyright 2026 The UnitQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// K-means codebook over frame features: k-means++ seeding, Lloyd updates
// with deterministic empty-cluster repair, nearest-centroid assignment.
// Distances are squared Euclidean, accumulated in double; ties go to the
// lowest centroid index so assignments are reproducible.

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "unitqa/rng.hpp"
#include "unitqa/unit_codec.hpp"

namespace unitqa {

// The paper's cluster count for the speech quantizer.
inline constexpr int kDefaultClusterCount = 100;

struct Codebook {
  MatF centroids;  // K rows, D columns
  int k = 0;
  int feature_dim = 0;
  double train_inertia = 0.0;                 // final sum of squared distances
  std::vector<double> inertia_history;        // one entry per Lloyd iteration

  void validate() const {
    if (k < 1) throw InvalidInputError("codebook needs k >= 1");
    if (centroids.rows() != k || centroids.cols() != feature_dim) {
      throw InvalidInputError("codebook centroid shape inconsistent");
    }
    if (!centroids.allFinite()) throw InvalidInputError("codebook centroids non-finite");
  }
};

namespace detail {

inline double sq_dist(const MatD& a, Eigen::Index ra, const MatD& b, Eigen::Index rb) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(ra, c) - b(rb, c);
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Nearest-centroid ID per frame (squared Euclidean, lowest index on ties).
inline std::vector<int> assign_units(const FrameFeatures& features, const Codebook& codebook) {
  codebook.validate();
  features.validate();
  if (features.num_frames() > 0 && features.dim() != codebook.feature_dim) {
    throw InvalidInputError("feature dim " + std::to_string(features.dim()) +
                            " does not match codebook dim " + std::to_string(codebook.feature_dim));
  }
  const MatD x = features.frames.cast<double>();
  const MatD c = codebook.centroids.cast<double>();
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = detail::sq_dist(x, i, c, j);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

namespace detail {

struct LloydRun {
  MatD centroids;
  std::vector<double> inertia_history;
};

// One run of k-means++ seeding plus Lloyd iterations over flattened frames.
inline LloydRun lloyd_once(const MatD& x, int k, int max_iters, std::uint64_t seed) {
  const Eigen::Index total = x.rows();
  const Eigen::Index dim = x.cols();
  Rng rng(seed);
  MatD centroids(k, dim);

  // k-means++ seeding: first centroid uniform, then D^2-weighted.
  std::vector<double> min_d(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_u64(static_cast<std::uint64_t>(total))));
  for (int c = 1; c < k; ++c) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      const double d = detail::sq_dist(x, i, centroids, c - 1);
      auto& m = min_d[static_cast<std::size_t>(i)];
      if (d < m) m = d;
      sum += m;
    }
    Eigen::Index pick = 0;
    if (sum > 0.0) {
      const double target = rng.uniform() * sum;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < total; ++i) {
        acc += min_d[static_cast<std::size_t>(i)];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_u64(static_cast<std::uint64_t>(total)));
    }
    centroids.row(c) = x.row(pick);
  }

  std::vector<int> assign(static_cast<std::size_t>(total), -1);
  std::vector<double> dist(static_cast<std::size_t>(total), 0.0);
  LloydRun run;

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment pass.
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = detail::sq_dist(x, i, centroids, j);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
      dist[static_cast<std::size_t>(i)] = best_d;
      inertia += best_d;
    }
    run.inertia_history.push_back(inertia);
    if (!changed) break;

    // Update pass.
    MatD sums = MatD::Zero(k, dim);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < total; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        centroids.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
      }
    }

    // Empty-cluster repair: the farthest member of the largest cluster
    // becomes the empty cluster's centroid (lowest frame index on ties).
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      int largest = 0;
      for (int l = 1; l < k; ++l) {
        if (counts[static_cast<std::size_t>(l)] > counts[static_cast<std::size_t>(largest)]) largest = l;
      }
      Eigen::Index far_i = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < total; ++i) {
        if (assign[static_cast<std::size_t>(i)] != largest) continue;
        const double d = detail::sq_dist(x, i, centroids, largest);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_i >= 0) {
        centroids.row(j) = x.row(far_i);
        assign[static_cast<std::size_t>(far_i)] = j;
        --counts[static_cast<std::size_t>(largest)];
        ++counts[static_cast<std::size_t>(j)];
      }
    }
  }

  run.centroids = std::move(centroids);
  return run;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ initialization, best of `n_init`
// restarts by final inertia (ties keep the earliest restart).
//
// Convergence: stop when no assignment changes or max_iters is reached.
// Empty clusters are repaired by stealing the farthest point of the largest
// cluster, which preserves the non-increasing inertia sequence. Restarts
// guard against the covering failures of a single seeding when cluster
// masses are very unequal.
inline Codebook train_codebook(const std::vector<FrameFeatures>& features, int k, int max_iters,
                               std::uint64_t seed, int n_init = 4) {
  if (k < 1) throw InvalidInputError("k must be >= 1");
  if (max_iters < 1) throw InvalidInputError("max_iters must be >= 1");
  if (n_init < 1) throw InvalidInputError("n_init must be >= 1");

  Eigen::Index dim = -1;
  Eigen::Index total = 0;
  for (const FrameFeatures& f : features) {
    f.validate();
    if (f.num_frames() == 0) continue;
    if (dim < 0) dim = f.dim();
    if (f.dim() != dim) throw InvalidInputError("feature dims differ across inputs");
    total += f.num_frames();
  }
  if (total < k) {
    throw InvalidInputError("need at least k=" + std::to_string(k) + " frames, got " + std::to_string(total));
  }

  MatD x(total, dim);
  Eigen::Index row = 0;
  for (const FrameFeatures& f : features) {
    for (Eigen::Index i = 0; i < f.num_frames(); ++i) x.row(row++) = f.frames.row(i).cast<double>();
  }

  detail::LloydRun best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n_init; ++r) {
    detail::LloydRun run = detail::lloyd_once(x, k, max_iters, derive_seed(seed, "kmeans.restart", r));
    const double inertia = run.inertia_history.empty() ? 0.0 : run.inertia_history.back();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(run);
    }
  }

  Codebook cb;
  cb.k = k;
  cb.feature_dim = static_cast<int>(dim);
  cb.centroids = best.centroids.cast<float>();
  cb.inertia_history = std::move(best.inertia_history);
  cb.train_inertia = cb.inertia_history.empty() ? 0.0 : cb.inertia_history.back();
  cb.validate();
  return cb;
}

inline Codebook train_codebook(const std::vector<FrameFeatures>& features, int k, std::uint64_t seed) {
  return train_codebook(features, k, 100, seed);
}

// --- Codebook file format: magic "UQCB", u32 K, u32 D, K*D float32 LE ---

inline void write_codebook(const std::string& path, const Codebook& cb) {
  cb.validate();
  BinaryWriter w;
  w.bytes("UQCB", 4);
  w.u32(static_cast<std::uint32_t>(cb.k));
  w.u32(static_cast<std::uint32_t>(cb.feature_dim));
  for (int r = 0; r < cb.k; ++r) {
    for (int c = 0; c < cb.feature_dim; ++c) w.f32(cb.centroids(r, c));
  }
  w.write_file(path);
}

inline Codebook read_codebook(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  char magic[4];
  r.raw(magic, 4);
  if (std::string_view(magic, 4) != "UQCB") throw InvalidInputError("not a codebook file: " + path);
  Codebook cb;
  cb.k = static_cast<int>(r.u32());
  cb.feature_dim = static_cast<int>(r.u32());
  cb.centroids.resize(cb.k, cb.feature_dim);
  for (int i = 0; i < cb.k; ++i) {
    for (int j = 0; j < cb.feature_dim; ++j) cb.centroids(i, j) = r.f32();
  }
  cb.validate();
  return cb;
}

}  // namespace unitqa
