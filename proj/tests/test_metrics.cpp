#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/dataset.hpp"
#include "tokendiff/metrics.hpp"
#include "tokendiff/rng.hpp"

using namespace tokendiff;

namespace {

MotionTrajectory trajectory_from(const std::vector<double>& values, double fps) {
  MotionTrajectory traj;
  traj.fps = fps;
  traj.frames.resize(static_cast<int64_t>(values.size()), 1);
  for (size_t i = 0; i < values.size(); ++i) traj.frames(static_cast<int64_t>(i), 0) = values[i];
  return traj;
}

/// Random smooth multi-dim sinusoid evaluated over [0, frames).
struct SinusoidMotion {
  Eigen::VectorXd freq, phase, amp;

  static SinusoidMotion random(int dims, RngStream& rng) {
    SinusoidMotion m;
    m.freq.resize(dims);
    m.phase.resize(dims);
    m.amp.resize(dims);
    for (int d = 0; d < dims; ++d) {
      m.freq(d) = 0.5 + 2.0 * rng.next_double();
      m.phase(d) = 2.0 * std::numbers::pi * rng.next_double();
      m.amp(d) = 0.5 + rng.next_double();
    }
    return m;
  }

  Eigen::VectorXd at(double t_seconds) const {
    Eigen::VectorXd out(freq.size());
    for (int d = 0; d < freq.size(); ++d)
      out(d) = amp(d) * std::sin(2.0 * std::numbers::pi * freq(d) * t_seconds + phase(d));
    return out;
  }
};

}  // namespace

TEST_CASE("zero-jerk windows report the epsilon floor") {
  std::vector<double> values(40);
  for (size_t i = 0; i < values.size(); ++i) values[i] = 0.25 * static_cast<double>(i);
  const MotionTrajectory traj = trajectory_from(values, 10.0);  // velocity 2.5/s
  const JerkReport report = jerk(traj, {0, 40}, 1e-12);
  REQUIRE(report.per_joint.size() == 1);
  CHECK(report.per_joint[0] == doctest::Approx(std::log(1e-12 / (2.5 * 2.5))).epsilon(1e-12));
  CHECK(report.total == report.per_joint[0]);
}

TEST_CASE("sinusoid jerk matches the analytic value") {
  // x(t) = sin(t): the squared-jerk integral over one period is pi and the
  // peak speed is 1, so the report should be ln(pi).
  const double fps = 1000.0;
  const int64_t frames = static_cast<int64_t>(2.0 * std::numbers::pi * fps) + 1;
  std::vector<double> values(static_cast<size_t>(frames));
  for (int64_t i = 0; i < frames; ++i)
    values[static_cast<size_t>(i)] = std::sin(static_cast<double>(i) / fps);
  const MotionTrajectory traj = trajectory_from(values, fps);
  const JerkReport report = jerk(traj, {0, frames});
  CHECK(std::abs(report.total - std::log(std::numbers::pi)) <
        0.02 * std::log(std::numbers::pi));
}

TEST_CASE("jerk is invariant under amplitude scaling") {
  RngStream rng(5);
  const SinusoidMotion motion = SinusoidMotion::random(6, rng);
  MotionTrajectory traj;
  traj.fps = 20.0;
  traj.frames.resize(100, 6);
  for (int64_t i = 0; i < 100; ++i)
    traj.frames.row(i) = motion.at(static_cast<double>(i) / traj.fps).transpose();
  MotionTrajectory scaled = traj;
  scaled.frames *= 3.7;
  const JerkReport a = jerk(traj, {20, 80});
  const JerkReport b = jerk(scaled, {20, 80});
  CHECK(std::abs(a.total - b.total) < 1e-9);
}

TEST_CASE("jerk validates its window") {
  const MotionTrajectory traj = trajectory_from(std::vector<double>(20, 1.0), 10.0);
  CHECK_THROWS_AS(jerk(traj, {0, 4}), ParameterError);   // too short
  CHECK_THROWS_AS(jerk(traj, {10, 25}), ParameterError);  // outside
  CHECK_THROWS_AS(jerk(traj, {0, 20}, 0.0), ParameterError);
}

TEST_CASE("transition windows center on boundaries and clip at edges") {
  const std::vector<int64_t> boundaries = {100};
  const std::vector<FrameWindow> centered = transition_windows(boundaries, 400, 40);
  REQUIRE(centered.size() == 1);
  CHECK(centered[0].begin == 80);
  CHECK(centered[0].end == 120);

  const std::vector<int64_t> near_edge = {10};
  const std::vector<FrameWindow> clipped = transition_windows(near_edge, 200, 40);
  CHECK(clipped[0].begin == 0);
  CHECK(clipped[0].end == 30);
}

TEST_CASE("a four-segment plan yields three windows") {
  const std::vector<int64_t> boundaries = {48, 96, 144};
  CHECK(transition_windows(boundaries, 192, 40).size() == 3);
}

TEST_CASE("transition windows reject boundaries outside the trajectory") {
  const std::vector<int64_t> bad = {0};
  CHECK_THROWS_AS(transition_windows(bad, 100, 40), ParameterError);
  const std::vector<int64_t> beyond = {100};
  CHECK_THROWS_AS(transition_windows(beyond, 100, 40), ParameterError);
}

TEST_CASE("diversity of identical features is zero") {
  RngStream rng(1);
  const std::vector<Eigen::VectorXd> features(5, Eigen::VectorXd::Constant(3, 2.0));
  CHECK(diversity(features, 2, rng) == 0.0);
}

TEST_CASE("diversity of two features is their distance") {
  RngStream rng(2);
  std::vector<Eigen::VectorXd> features = {Eigen::VectorXd::Zero(2),
                                           Eigen::VectorXd::Constant(2, 3.0 / std::sqrt(2.0))};
  CHECK(diversity(features, 10, rng) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("diversity of unit gaussians matches the closed form") {
  const int dims = 8;
  const int n = 1000;
  RngStream rng(3);
  std::vector<Eigen::VectorXd> features;
  features.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(dims);
    for (int d = 0; d < dims; d += 2) {
      const double u1 = rng.next_double();
      const double u2 = rng.next_double();
      const double r = std::sqrt(-2.0 * std::log1p(-u1));
      v(d) = r * std::cos(2.0 * std::numbers::pi * u2);
      v(d + 1) = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    features.push_back(std::move(v));
  }
  // E||X - Y|| for X, Y ~ N(0, I_d): 2 * Gamma((d+1)/2) / Gamma(d/2)
  const double expected =
      2.0 * std::exp(std::lgamma((dims + 1) / 2.0) - std::lgamma(dims / 2.0));
  const double measured = diversity(features, 500, rng);
  CHECK(std::abs(measured - expected) < 0.05 * expected);
}

TEST_CASE("diversity requires at least two features") {
  RngStream rng(4);
  const std::vector<Eigen::VectorXd> one(1, Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(diversity(one, 1, rng), ParameterError);
}

TEST_CASE("frechet distance of a set to itself is zero") {
  RngStream rng(6);
  Eigen::MatrixXd set(40, 3);
  for (int64_t i = 0; i < set.size(); ++i) set(i / 3, i % 3) = rng.next_double();
  CHECK(frechet_lite(set, set) < 1e-8);
}

TEST_CASE("frechet distance of shifted 1-D gaussians is the squared mean gap") {
  RngStream rng(7);
  const int n = 500;
  Eigen::MatrixXd a(n, 1), b(n, 1);
  for (int i = 0; i < n; ++i) {
    const double u1 = rng.next_double(), u2 = rng.next_double();
    const double u3 = rng.next_double(), u4 = rng.next_double();
    a(i, 0) = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    b(i, 0) = 2.0 + std::sqrt(-2.0 * std::log1p(-u3)) * std::cos(2.0 * std::numbers::pi * u4);
  }
  CHECK(frechet_lite(a, b) == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("frechet distance is symmetric and nonnegative on random sets") {
  RngStream rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(30, 4), b(25, 4);
    for (int64_t i = 0; i < a.rows(); ++i)
      for (int64_t j = 0; j < 4; ++j) a(i, j) = 2.0 * rng.next_double();
    for (int64_t i = 0; i < b.rows(); ++i)
      for (int64_t j = 0; j < 4; ++j) b(i, j) = 1.0 + rng.next_double();
    const double ab = frechet_lite(a, b);
    const double ba = frechet_lite(b, a);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) < 1e-8);
  }
}

TEST_CASE("frechet requires more samples than dimensions") {
  const Eigen::MatrixXd set = Eigen::MatrixXd::Random(3, 4);
  CHECK_THROWS_AS(frechet_lite(set, set), ParameterError);
}

TEST_CASE("profile of a constant trajectory is all zeros") {
  MotionTrajectory traj;
  traj.fps = 20.0;
  traj.frames = Eigen::MatrixXd::Constant(30, 3, 1.5);
  const std::vector<ProfileRow> rows = motion_profile(traj);
  REQUIRE(rows.size() == 30);
  for (const ProfileRow& row : rows) {
    CHECK(row.mean_speed == 0.0);
    CHECK(row.mean_jerk == 0.0);
  }
}

TEST_CASE("profile speed peaks inside the interpolation span of a decoded pair") {
  Eigen::MatrixXd entries(2, 1);
  entries << 0.0, 1.0;
  const Codebook cb = make_codebook(std::move(entries));
  const MotionTrajectory traj = decode_tokens(TokenSequence::single({0, 1}, 1), cb, 4.0);
  const std::vector<ProfileRow> rows = motion_profile(traj);
  REQUIRE(rows.size() == 8);
  // frames ramp up to 1.0 by frame 4 and hold; speed inside the ramp beats
  // the trailing hold
  CHECK(rows[2].mean_speed > rows[6].mean_speed);
  CHECK(rows[2].mean_speed > 0.0);
  CHECK(rows[6].mean_speed == 0.0);
}

TEST_CASE("decoded synthetic-corpus trajectories have finite jerk") {
  const Codebook cb = generate_synthetic_codebook(16, 4, 4, 31);
  const std::vector<TrainingRecord> records = make_synthetic_dataset(cb, 2, 4, 10, 5);
  REQUIRE(records.size() == 8);
  for (const TrainingRecord& rec : records) {
    const MotionTrajectory traj =
        decode_tokens(TokenSequence::single(rec.tokens, rec.condition), cb, 20.0);
    const JerkReport report = jerk(traj, {0, traj.frame_count()});
    CHECK(std::isfinite(report.total));
    for (double v : report.per_joint) CHECK(std::isfinite(v));
  }
}

TEST_CASE("hard concatenation jerks more than a cross-faded blend") {
  RngStream rng(2024);
  const int dims = 6;
  const double fps = 20.0;
  const int64_t half = 120;
  const int64_t total = 2 * half;
  int harder = 0;
  const int constructions = 100;
  for (int trial = 0; trial < constructions; ++trial) {
    const SinusoidMotion motion_a = SinusoidMotion::random(dims, rng);
    const SinusoidMotion motion_b = SinusoidMotion::random(dims, rng);

    MotionTrajectory hard, faded;
    hard.fps = faded.fps = fps;
    hard.frames.resize(total, dims);
    faded.frames.resize(total, dims);
    const int64_t fade_begin = half - 20, fade_end = half + 20;
    for (int64_t i = 0; i < total; ++i) {
      const double t = static_cast<double>(i) / fps;
      const Eigen::VectorXd a = motion_a.at(t);
      const Eigen::VectorXd b = motion_b.at(t);
      hard.frames.row(i) = (i < half ? a : b).transpose();
      double w = 0.0;
      if (i >= fade_end) w = 1.0;
      else if (i >= fade_begin)
        w = static_cast<double>(i - fade_begin) / static_cast<double>(fade_end - fade_begin);
      faded.frames.row(i) = ((1.0 - w) * a + w * b).transpose();
    }
    const FrameWindow window{half - 20, half + 20};
    harder += jerk(hard, window).total > jerk(faded, window).total;
  }
  CHECK(harder >= 95);
}
