#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/rng.hpp"

namespace tokendiff {

/// Half-open frame interval [begin, end).
struct FrameWindow {
  int64_t begin = 0;
  int64_t end = 0;

  int64_t length() const { return end - begin; }
};

/// Dimensionless log-jerk per joint over a window; total is their sum.
struct JerkReport {
  std::vector<double> per_joint;
  double total = 0.0;
  FrameWindow window;
  double fps = 0.0;
};

/// Smoothness metric: per joint, the log of the squared-acceleration-
/// derivative integral over the window, normalized by the joint's squared
/// peak speed in the window. Derivatives use central differences (one-sided
/// at trajectory ends), the integral a trapezoidal rule. Joints are
/// consecutive groups of 3 columns; a trailing partial group forms the last
/// joint. The integral is floored at epsilon before the log, so perfectly
/// smooth windows report ln(epsilon / v_peak^2) instead of -inf.
JerkReport jerk(const MotionTrajectory& traj, FrameWindow window, double epsilon = 1e-12);

/// Windows of `width` frames centered on each segment boundary, clipped to
/// the trajectory. Boundaries must lie strictly inside [1, frame_count).
std::vector<FrameWindow> transition_windows(std::span<const int64_t> boundaries,
                                            int64_t frame_count, int64_t width = 40);

/// Mean L2 distance over up to pair_count disjoint random pairs.
double diversity(const std::vector<Eigen::VectorXd>& features, int pair_count, RngStream& rng);

/// Gaussian-moment distance between two sample sets (rows = samples):
/// ||mu_A - mu_B||^2 + tr(S_A + S_B - 2 (S_A S_B)^{1/2}), with the matrix
/// square root taken through symmetric eigendecompositions and negative
/// eigenvalues clamped at zero. Near-singular covariances are regularized
/// by 1e-6 on the diagonal (with a warning on stderr).
double frechet_lite(const Eigen::MatrixXd& set_a, const Eigen::MatrixXd& set_b);

/// Per-frame mean speed and mean jerk magnitude across joints.
struct ProfileRow {
  int64_t frame = 0;
  double mean_speed = 0.0;
  double mean_jerk = 0.0;
};

std::vector<ProfileRow> motion_profile(const MotionTrajectory& traj);

/// Mean-pooled frames of a trajectory, the per-sequence feature vector used
/// by diversity and frechet_lite.
Eigen::VectorXd mean_pooled_feature(const MotionTrajectory& traj);

}  // namespace tokendiff
