#include "tokendiff/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "tokendiff/rng.hpp"

namespace tokendiff {
namespace {

double standard_normal(RngStream& rng) {
  // Box-Muller, cosine branch only; two uniforms per draw, stateless.
  const double u1 = rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Byte-level row hash for the exact-duplicate check.
size_t hash_row(const Eigen::MatrixXd& m, int row) {
  size_t h = 1469598103934665603ULL;
  for (int c = 0; c < m.cols(); ++c) {
    double v = m(row, c);
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

bool rows_equal(const Eigen::MatrixXd& m, int a, int b) {
  for (int c = 0; c < m.cols(); ++c)
    if (m(a, c) != m(b, c)) return false;
  return true;
}

void validate_entries(const Eigen::MatrixXd& entries) {
  if (entries.rows() < 2) throw ParameterError("codebook needs at least 2 entries");
  if (entries.cols() < 1) throw ParameterError("codebook dimension must be >= 1");
  if (!entries.allFinite()) throw ParameterError("codebook entries must be finite");
}

}  // namespace

Codebook make_codebook(Eigen::MatrixXd entries, uint64_t seed) {
  validate_entries(entries);
  std::unordered_multimap<size_t, int> seen;
  for (int i = 0; i < entries.rows(); ++i) {
    const size_t h = hash_row(entries, i);
    auto [lo, hi] = seen.equal_range(h);
    for (auto it = lo; it != hi; ++it)
      if (rows_equal(entries, it->second, i))
        throw ParameterError("codebook entries " + std::to_string(it->second) + " and " +
                             std::to_string(i) + " are identical");
    seen.emplace(h, i);
  }
  return Codebook{std::move(entries), seed};
}

Codebook generate_synthetic_codebook(int k, int dim, int clusters, uint64_t seed) {
  if (k < 2) throw ParameterError("codebook size must be >= 2");
  if (dim < 1) throw ParameterError("codebook dimension must be >= 1");
  if (clusters < 1 || clusters > k)
    throw ParameterError("cluster count must lie in [1, " + std::to_string(k) + "]");

  RngStream rng(seed);
  Eigen::MatrixXd centers(clusters, dim);
  for (int c = 0; c < clusters; ++c)
    for (int d = 0; d < dim; ++d) centers(c, d) = 4.0 * rng.next_double() - 2.0;

  Eigen::MatrixXd entries(k, dim);
  for (int i = 0; i < k; ++i) {
    const int c = i % clusters;
    for (int d = 0; d < dim; ++d) entries(i, d) = centers(c, d) + 0.25 * standard_normal(rng);
  }

  // Perturb exact duplicates until all rows are distinct.
  bool collided = true;
  while (collided) {
    collided = false;
    std::unordered_multimap<size_t, int> seen;
    for (int i = 0; i < k; ++i) {
      const size_t h = hash_row(entries, i);
      auto [lo, hi] = seen.equal_range(h);
      bool duplicate = false;
      for (auto it = lo; it != hi && !duplicate; ++it) duplicate = rows_equal(entries, it->second, i);
      if (duplicate) {
        for (int d = 0; d < dim; ++d) entries(i, d) += 1e-9 * standard_normal(rng);
        collided = true;
      } else {
        seen.emplace(h, i);
      }
    }
  }

  return Codebook{std::move(entries), seed};
}

RankMatrix distance_rank_matrix(const Codebook& cb) {
  validate_entries(cb.entries);
  const int k = cb.size();
  Eigen::MatrixXi ranks(k, k);
  std::vector<int> order(k);
  std::vector<double> dist(k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      dist[i] = (cb.entries.row(i) - cb.entries.row(j)).squaredNorm();
      order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist[a] != dist[b]) return dist[a] < dist[b];
      return a < b;  // ties break toward the lower index
    });
    for (int r = 0; r < k; ++r) ranks(order[r], j) = r + 1;
  }
  return RankMatrix{std::move(ranks)};
}

int quantize(const Eigen::Ref<const Eigen::VectorXd>& v, const Codebook& cb) {
  if (v.size() != cb.dim())
    throw ParameterError("vector dimension " + std::to_string(v.size()) +
                         " does not match codebook dimension " + std::to_string(cb.dim()));
  if (!v.allFinite()) throw ParameterError("vector to quantize must be finite");
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cb.size(); ++i) {
    const double d = (cb.entries.row(i).transpose() - v).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

MotionTrajectory decode_tokens(const TokenSequence& tokens, const Codebook& cb, double fps) {
  if (fps <= 0.0) throw ParameterError("fps must be positive");
  if (tokens.size() == 0) throw ParameterError("cannot decode an empty token sequence");
  for (int64_t p = 0; p < tokens.size(); ++p) {
    const int32_t tok = tokens.tokens[p];
    if (tok == kMaskToken)
      throw InvalidStateError("MASK token at position " + std::to_string(p) +
                              " cannot be decoded");
    if (tok < 0 || tok >= cb.size())
      throw ParameterError("token " + std::to_string(tok) + " outside codebook");
  }

  const int64_t n = tokens.size();
  MotionTrajectory traj;
  traj.fps = fps;
  traj.frames.resize(4 * n, cb.dim());
  for (int64_t p = 0; p < n; ++p) {
    const auto cur = cb.entries.row(tokens.tokens[p]);
    const auto nxt = (p + 1 < n) ? cb.entries.row(tokens.tokens[p + 1]) : cur;
    for (int j = 0; j < 4; ++j)
      traj.frames.row(4 * p + j) = cur + (j / 4.0) * (nxt - cur);
  }
  return traj;
}

}  // namespace tokendiff
