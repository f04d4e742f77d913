#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/rng.hpp"

using namespace tokendiff;

namespace {

Codebook line_codebook(std::vector<double> positions) {
  Eigen::MatrixXd entries(static_cast<int64_t>(positions.size()), 1);
  for (size_t i = 0; i < positions.size(); ++i) entries(static_cast<int64_t>(i), 0) = positions[i];
  return make_codebook(std::move(entries));
}

bool is_permutation_column(const Eigen::MatrixXi& ranks, int j) {
  std::vector<int> seen(static_cast<size_t>(ranks.rows()) + 1, 0);
  for (int i = 0; i < ranks.rows(); ++i) {
    const int r = ranks(i, j);
    if (r < 1 || r > ranks.rows()) return false;
    seen[static_cast<size_t>(r)]++;
  }
  for (int r = 1; r <= ranks.rows(); ++r)
    if (seen[static_cast<size_t>(r)] != 1) return false;
  return true;
}

// Independent rank oracle: full pairwise-distance sort per column.
Eigen::MatrixXi brute_force_ranks(const Codebook& cb) {
  const int k = cb.size();
  Eigen::MatrixXi ranks(k, k);
  for (int j = 0; j < k; ++j) {
    std::vector<int> idx(static_cast<size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double da = (cb.entries.row(a) - cb.entries.row(j)).squaredNorm();
      const double db = (cb.entries.row(b) - cb.entries.row(j)).squaredNorm();
      return da < db;
    });
    for (int r = 0; r < k; ++r) ranks(idx[static_cast<size_t>(r)], j) = r + 1;
  }
  return ranks;
}

}  // namespace

TEST_CASE("synthetic codebook is deterministic per seed") {
  const Codebook a = generate_synthetic_codebook(8, 3, 2, 7);
  const Codebook b = generate_synthetic_codebook(8, 3, 2, 7);
  REQUIRE(a.size() == 8);
  REQUIRE(a.dim() == 3);
  CHECK(a.entries == b.entries);
  const Codebook c = generate_synthetic_codebook(8, 3, 2, 8);
  CHECK(a.entries != c.entries);
}

TEST_CASE("minimal codebook: two distinct scalars") {
  const Codebook cb = generate_synthetic_codebook(2, 1, 1, 0);
  CHECK(cb.entries(0, 0) != cb.entries(1, 0));
}

TEST_CASE("large codebook rank columns are permutations, matching the sort oracle") {
  const Codebook cb = generate_synthetic_codebook(512, 512, 16, 1);
  const RankMatrix ranks = distance_rank_matrix(cb);
  for (int j = 0; j < ranks.size(); ++j) CHECK(is_permutation_column(ranks.ranks, j));
  const Eigen::MatrixXi expected = brute_force_ranks(cb);
  CHECK(ranks.ranks == expected);
}

TEST_CASE("rank matrix on a line codebook") {
  const Codebook cb = line_codebook({0.0, 1.0, 3.0});
  const RankMatrix rm = distance_rank_matrix(cb);
  // column for the entry at 0: distances 0, 1, 3
  CHECK(rm.ranks(0, 0) == 1);
  CHECK(rm.ranks(1, 0) == 2);
  CHECK(rm.ranks(2, 0) == 3);
}

TEST_CASE("rank matrix diagonal is all ones") {
  const Codebook cb = generate_synthetic_codebook(16, 4, 3, 5);
  const RankMatrix rm = distance_rank_matrix(cb);
  for (int j = 0; j < rm.size(); ++j) CHECK(rm.ranks(j, j) == 1);
}

TEST_CASE("equidistant entries rank by ascending index") {
  // entries at -1 and +1 are equidistant from the entry at 0
  const Codebook cb = line_codebook({0.0, 1.0, -1.0});
  const RankMatrix rm = distance_rank_matrix(cb);
  CHECK(rm.ranks(1, 0) == 2);  // index 1 beats index 2 on the tie
  CHECK(rm.ranks(2, 0) == 3);
}

TEST_CASE("rank matrix is invariant under global translation") {
  const Codebook cb = generate_synthetic_codebook(12, 3, 4, 21);
  Eigen::MatrixXd shifted = cb.entries;
  shifted.rowwise() += Eigen::RowVector3d(10.0, -3.0, 0.5);
  const Codebook cb2 = make_codebook(std::move(shifted));
  CHECK(distance_rank_matrix(cb).ranks == distance_rank_matrix(cb2).ranks);
}

TEST_CASE("quantize returns the exact entry and breaks ties low") {
  const Codebook cb = line_codebook({0.0, 1.0, 3.0});
  CHECK(quantize(Eigen::VectorXd::Constant(1, 3.0), cb) == 2);
  CHECK(quantize(Eigen::VectorXd::Constant(1, 0.5), cb) == 0);  // tie between 0 and 1
}

TEST_CASE("quantize matches an exhaustive scan on random inputs") {
  const Codebook cb = generate_synthetic_codebook(64, 6, 8, 3);
  RngStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd v(6);
    for (int d = 0; d < 6; ++d) v(d) = 6.0 * rng.next_double() - 3.0;
    int best = 0;
    double best_dist = (cb.entries.row(0).transpose() - v).squaredNorm();
    for (int i = 1; i < cb.size(); ++i) {
      const double dist = (cb.entries.row(i).transpose() - v).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    CHECK(quantize(v, cb) == best);
  }
}

TEST_CASE("quantize rejects dimension mismatches") {
  const Codebook cb = generate_synthetic_codebook(4, 3, 2, 0);
  CHECK_THROWS_AS(quantize(Eigen::VectorXd::Zero(2), cb), ParameterError);
}

TEST_CASE("decode expands a single token to four held frames") {
  const Codebook cb = line_codebook({0.0, 1.0});
  const MotionTrajectory traj = decode_tokens(TokenSequence::single({0}, 1), cb, 20.0);
  REQUIRE(traj.frame_count() == 4);
  for (int i = 0; i < 4; ++i) CHECK(traj.frames(i, 0) == 0.0);
}

TEST_CASE("decode interpolates between equal tokens to a constant") {
  const Codebook cb = line_codebook({0.5, 1.0});
  const MotionTrajectory traj = decode_tokens(TokenSequence::single({0, 0}, 1), cb, 20.0);
  REQUIRE(traj.frame_count() == 8);
  for (int i = 0; i < 8; ++i) CHECK(traj.frames(i, 0) == 0.5);
}

TEST_CASE("decode ramps linearly toward the next token") {
  const Codebook cb = line_codebook({0.0, 1.0});
  const MotionTrajectory traj = decode_tokens(TokenSequence::single({0, 1}, 1), cb, 20.0);
  REQUIRE(traj.frame_count() == 8);
  const std::vector<double> expected = {0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0};
  for (size_t i = 0; i < 8; ++i) CHECK(traj.frames(static_cast<int64_t>(i), 0) == expected[i]);
}

TEST_CASE("decode rejects MASK tokens") {
  const Codebook cb = line_codebook({0.0, 1.0});
  CHECK_THROWS_AS(decode_tokens(TokenSequence::single({0, kMaskToken}, 1), cb, 20.0),
                  InvalidStateError);
}

TEST_CASE("rank columns are permutations across random seeds") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    const int k = 2 + static_cast<int>(rng.next_below(15));
    const int d = 1 + static_cast<int>(rng.next_below(5));
    const int clusters = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
    const Codebook cb = generate_synthetic_codebook(k, d, clusters, seed * 31 + 1);
    const RankMatrix rm = distance_rank_matrix(cb);
    for (int j = 0; j < k; ++j) CHECK(is_permutation_column(rm.ranks, j));
  }
}

TEST_CASE("decode then quantize round-trips every token") {
  const Codebook cb = generate_synthetic_codebook(32, 5, 4, 9);
  for (int32_t i = 0; i < cb.size(); ++i) {
    const MotionTrajectory traj = decode_tokens(TokenSequence::single({i}, 1), cb, 20.0);
    CHECK(quantize(traj.frames.row(0).transpose(), cb) == i);
  }
}

TEST_CASE("make_codebook validates entries") {
  Eigen::MatrixXd dup(2, 1);
  dup << 1.0, 1.0;
  CHECK_THROWS_AS(make_codebook(std::move(dup)), ParameterError);
  CHECK_THROWS_AS(make_codebook(Eigen::MatrixXd::Zero(1, 3)), ParameterError);
  CHECK_THROWS_AS(generate_synthetic_codebook(4, 2, 9, 0), ParameterError);
}
