#include "tokendiff/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <string>

namespace tokendiff {
namespace {

/// Time derivative of a frame series: central differences inside, one-sided
/// at the series ends.
Eigen::MatrixXd derivative(const Eigen::MatrixXd& series, double fps) {
  const int64_t n = series.rows();
  Eigen::MatrixXd out(n, series.cols());
  if (n < 2) throw ParameterError("derivative needs at least 2 frames");
  out.row(0) = (series.row(1) - series.row(0)) * fps;
  out.row(n - 1) = (series.row(n - 1) - series.row(n - 2)) * fps;
  for (int64_t i = 1; i + 1 < n; ++i)
    out.row(i) = (series.row(i + 1) - series.row(i - 1)) * (0.5 * fps);
  return out;
}

int joint_count(int dim) { return (dim + 2) / 3; }

std::pair<int, int> joint_columns(int joint, int dim) {
  const int begin = 3 * joint;
  const int width = std::min(3, dim - begin);
  return {begin, width};
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& samples) {
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
}

/// Symmetric PSD square root; negative eigenvalues are clamped at zero.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

Eigen::MatrixXd regularized_covariance(const Eigen::MatrixXd& samples, const char* label) {
  Eigen::MatrixXd cov = covariance(samples);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const double floor = 1e-12 * std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  if (solver.eigenvalues().minCoeff() < floor) {
    std::cerr << "warning: near-singular covariance in set " << label
              << ", adding 1e-6 to the diagonal\n";
    cov.diagonal().array() += 1e-6;
  }
  return cov;
}

}  // namespace

JerkReport jerk(const MotionTrajectory& traj, FrameWindow window, double epsilon) {
  if (traj.fps <= 0.0) throw ParameterError("fps must be positive");
  if (epsilon <= 0.0) throw ParameterError("epsilon must be positive");
  if (window.begin < 0 || window.end > traj.frame_count() || window.begin >= window.end)
    throw ParameterError("window outside the trajectory");
  if (window.length() < 5)
    throw ParameterError("window of " + std::to_string(window.length()) +
                         " frames is too short for third differences");

  const double dt = 1.0 / traj.fps;
  const Eigen::MatrixXd vel = derivative(traj.frames, traj.fps);
  const Eigen::MatrixXd acc = derivative(vel, traj.fps);
  const Eigen::MatrixXd jrk = derivative(acc, traj.fps);

  JerkReport report;
  report.window = window;
  report.fps = traj.fps;
  const int joints = joint_count(traj.dim());
  report.per_joint.resize(joints);
  for (int p = 0; p < joints; ++p) {
    const auto [col, width] = joint_columns(p, traj.dim());
    double peak_speed = 0.0;
    for (int64_t i = window.begin; i < window.end; ++i)
      peak_speed = std::max(peak_speed, vel.row(i).segment(col, width).norm());
    double integral = 0.0;
    for (int64_t i = window.begin; i + 1 < window.end; ++i) {
      const double a = jrk.row(i).segment(col, width).squaredNorm();
      const double b = jrk.row(i + 1).segment(col, width).squaredNorm();
      integral += 0.5 * (a + b) * dt;
    }
    report.per_joint[p] =
        std::log(std::max(integral, epsilon) / std::max(peak_speed * peak_speed, epsilon));
    report.total += report.per_joint[p];
  }
  return report;
}

std::vector<FrameWindow> transition_windows(std::span<const int64_t> boundaries,
                                            int64_t frame_count, int64_t width) {
  if (width < 1) throw ParameterError("window width must be >= 1");
  std::vector<FrameWindow> windows;
  windows.reserve(boundaries.size());
  for (int64_t b : boundaries) {
    if (b <= 0 || b >= frame_count)
      throw ParameterError("boundary " + std::to_string(b) +
                           " not strictly inside the trajectory");
    FrameWindow w{b - width / 2, b + width / 2};
    w.begin = std::max<int64_t>(w.begin, 0);
    w.end = std::min(w.end, frame_count);
    windows.push_back(w);
  }
  return windows;
}

double diversity(const std::vector<Eigen::VectorXd>& features, int pair_count, RngStream& rng) {
  if (features.size() < 2) throw ParameterError("diversity needs at least 2 feature vectors");
  if (pair_count < 1) throw ParameterError("pair count must be >= 1");

  std::vector<size_t> order(features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.next_below(i + 1)]);

  const size_t pairs = std::min<size_t>(pair_count, order.size() / 2);
  double sum = 0.0;
  for (size_t p = 0; p < pairs; ++p)
    sum += (features[order[2 * p]] - features[order[2 * p + 1]]).norm();
  return sum / static_cast<double>(pairs);
}

double frechet_lite(const Eigen::MatrixXd& set_a, const Eigen::MatrixXd& set_b) {
  if (set_a.cols() != set_b.cols()) throw ParameterError("feature dimensions differ");
  if (set_a.rows() <= set_a.cols() || set_b.rows() <= set_b.cols())
    throw ParameterError("each set needs more samples than feature dimensions");

  const Eigen::VectorXd mean_a = set_a.colwise().mean();
  const Eigen::VectorXd mean_b = set_b.colwise().mean();
  const Eigen::MatrixXd cov_a = regularized_covariance(set_a, "A");
  const Eigen::MatrixXd cov_b = regularized_covariance(set_b, "B");

  const Eigen::MatrixXd sqrt_b = symmetric_sqrt(cov_b);
  Eigen::MatrixXd inner = sqrt_b * cov_a * sqrt_b;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(inner);
  const double trace_sqrt = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value =
      (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

std::vector<ProfileRow> motion_profile(const MotionTrajectory& traj) {
  if (traj.fps <= 0.0) throw ParameterError("fps must be positive");
  if (traj.frame_count() < 4) throw ParameterError("profile needs at least 4 frames");
  const Eigen::MatrixXd vel = derivative(traj.frames, traj.fps);
  const Eigen::MatrixXd acc = derivative(vel, traj.fps);
  const Eigen::MatrixXd jrk = derivative(acc, traj.fps);

  const int joints = joint_count(traj.dim());
  std::vector<ProfileRow> rows(static_cast<size_t>(traj.frame_count()));
  for (int64_t i = 0; i < traj.frame_count(); ++i) {
    double speed = 0.0;
    double jerk_mag = 0.0;
    for (int p = 0; p < joints; ++p) {
      const auto [col, width] = joint_columns(p, traj.dim());
      speed += vel.row(i).segment(col, width).norm();
      jerk_mag += jrk.row(i).segment(col, width).norm();
    }
    rows[i] = ProfileRow{i, speed / joints, jerk_mag / joints};
  }
  return rows;
}

Eigen::VectorXd mean_pooled_feature(const MotionTrajectory& traj) {
  return traj.frames.colwise().mean();
}

}  // namespace tokendiff
