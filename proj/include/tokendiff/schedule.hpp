#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/rng.hpp"
#include "tokendiff/sequence.hpp"

namespace tokendiff {

/// Per-step mixing coefficients of the corruption chain. alpha(t) is the
/// keep probability, gamma(t) the mask probability; the residual
/// 1 - alpha(t) - gamma(t) is spread over token replacements. Cumulative
/// targets alpha_bar / gamma_bar describe q(z_t | z_0) directly.
class NoiseSchedule {
 public:
  /// Linear cumulative ramps: gamma_bar(t) = gamma_max * t/T and
  /// alpha_bar(t) = 1 - (1 - alpha_min) * t/T, with per-step values
  /// recovered as alpha(t) = alpha_bar(t)/alpha_bar(t-1) and
  /// gamma(t) = (gamma_bar(t) - gamma_bar(t-1)) / (1 - gamma_bar(t-1)).
  /// Throws ScheduleError naming the first step with negative residual mass.
  static NoiseSchedule linear(int t_steps, double gamma_max, double alpha_min, double eta);

  /// Explicit per-step coefficients (tests, degenerate chains). Cumulative
  /// values are accumulated from the per-step ones.
  NoiseSchedule(std::vector<double> alpha, std::vector<double> gamma, double eta);

  int steps() const { return static_cast<int>(alpha_.size()); }
  double eta() const { return eta_; }

  double alpha(int t) const { return alpha_[check_step(t) - 1]; }
  double gamma(int t) const { return gamma_[t - 1]; }

  /// Cumulative keep probability; alpha_bar(0) = 1.
  double alpha_bar(int t) const { return alpha_bar_[check_cumulative_step(t)]; }
  /// Cumulative mask probability; gamma_bar(0) = 0.
  double gamma_bar(int t) const { return gamma_bar_[t]; }

 private:
  NoiseSchedule() = default;
  int check_step(int t) const;
  int check_cumulative_step(int t) const;
  void validate() const;

  std::vector<double> alpha_, gamma_;          // index t-1
  std::vector<double> alpha_bar_, gamma_bar_;  // index t, length T+1
  double eta_ = 0.0;
};

/// Column-stochastic transition matrix over K tokens plus the absorbing
/// MASK state (state index K). probs(i, j) = P(state i at t | state j at t-1).
struct TransitionMatrix {
  Eigen::MatrixXd probs;
  int num_tokens = 0;

  int mask_state() const { return num_tokens; }
};

/// Uniform replacement: every off-diagonal token pair shares
/// beta_t = (1 - alpha_t - gamma_t) / K.
TransitionMatrix uniform_transition_matrix(const NoiseSchedule& sched, int t, int num_tokens);

/// Distance-rank replacement: entry (i, j) = alpha_t * [i == j] + beta(t, d_ij)
/// with beta(t, d) = (1 - gamma_t - alpha_t) * softmax_d(eta * t/T * d/K).
/// Early steps favor distant tokens; eta -> 0 recovers the uniform matrix.
TransitionMatrix dynamic_transition_matrix(const NoiseSchedule& sched, int t, const RankMatrix& ranks);

/// Per-step matrices plus cached cumulative products for a fixed schedule
/// and token geometry. Immutable after construction; safe for concurrent
/// reads.
class TransitionModel {
 public:
  static TransitionModel uniform(const NoiseSchedule& sched, int num_tokens);
  static TransitionModel dynamic(const NoiseSchedule& sched, const RankMatrix& ranks);

  const NoiseSchedule& schedule() const { return schedule_; }
  int num_tokens() const { return num_tokens_; }
  int mask_state() const { return num_tokens_; }
  bool is_uniform() const { return uniform_; }

  /// State index for a token value (MASK maps to the absorbing state).
  int state_of(int32_t token) const { return token == kMaskToken ? num_tokens_ : token; }
  int32_t token_of(int state) const { return state == num_tokens_ ? kMaskToken : state; }

  const TransitionMatrix& step(int t) const;        // Q_t, t in 1..T
  const TransitionMatrix& cumulative(int t) const;  // Q_t * ... * Q_1

  /// q(z_{t-1} | z_t, z_0): elementwise product of the Q_t row for z_t with
  /// the cumulative column for z_0, normalized. Throws UnreachableStateError
  /// when z_t has zero forward probability from z_0.
  Eigen::VectorXd posterior(int z_t_state, int32_t z0_token, int t) const;

  /// Samples q(z_t | z_0) independently per position.
  TokenSequence forward_sample(const TokenSequence& z0, int t, RngStream& rng) const;

 private:
  TransitionModel(NoiseSchedule sched, int num_tokens, bool uniform);
  void build_steps(const RankMatrix* ranks);
  void build_cumulative();

  NoiseSchedule schedule_;
  int num_tokens_;
  bool uniform_;
  std::vector<TransitionMatrix> steps_;       // index t-1
  std::vector<TransitionMatrix> cumulative_;  // index t-1
};

}  // namespace tokendiff
