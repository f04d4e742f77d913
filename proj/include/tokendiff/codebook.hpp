#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "tokendiff/sequence.hpp"

namespace tokendiff {

/// Token vocabulary: K entries of D-dimensional latent vectors.
struct Codebook {
  Eigen::MatrixXd entries;  // K x D, row i = entry i
  uint64_t seed = 0;

  int size() const { return static_cast<int>(entries.rows()); }
  int dim() const { return static_cast<int>(entries.cols()); }
};

/// ranks(i, j) = rank of entry i among all entries ordered by L2 distance
/// to entry j; rank 1 is entry j itself. Ties break toward the lower index,
/// so every column is a permutation of 1..K.
struct RankMatrix {
  Eigen::MatrixXi ranks;

  int size() const { return static_cast<int>(ranks.rows()); }
};

/// Decoded continuous motion: frames x dims, positions at a fixed frame rate.
struct MotionTrajectory {
  Eigen::MatrixXd frames;  // L x D_out
  double fps = 20.0;

  int64_t frame_count() const { return frames.rows(); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

/// Wraps raw entries as a codebook, validating shape, finiteness and
/// pairwise distinctness.
Codebook make_codebook(Eigen::MatrixXd entries, uint64_t seed = 0);

/// Deterministic synthetic codebook: entries scattered around `clusters`
/// cluster centers so the distance-rank structure is non-trivial.
/// Duplicate entries are perturbed until all rows are distinct.
Codebook generate_synthetic_codebook(int k, int dim, int clusters, uint64_t seed);

RankMatrix distance_rank_matrix(const Codebook& cb);

/// Nearest entry by L2 distance; ties break toward the lower index.
int quantize(const Eigen::Ref<const Eigen::VectorXd>& v, const Codebook& cb);

/// Expands each token to 4 frames, linearly interpolated toward the next
/// token's entry; the last token is held. Throws InvalidStateError on MASK.
MotionTrajectory decode_tokens(const TokenSequence& tokens, const Codebook& cb, double fps);

}  // namespace tokendiff
