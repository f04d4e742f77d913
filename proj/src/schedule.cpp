#include "tokendiff/schedule.hpp"

#include <cmath>
#include <string>

namespace tokendiff {

NoiseSchedule NoiseSchedule::linear(int t_steps, double gamma_max, double alpha_min, double eta) {
  if (t_steps < 1) throw ParameterError("schedule needs at least one step");
  if (!(gamma_max > 0.0 && gamma_max < 1.0)) throw ParameterError("gamma_max must lie in (0, 1)");
  if (!(alpha_min > 0.0 && alpha_min < 1.0 - gamma_max))
    throw ParameterError("alpha_min must lie in (0, 1 - gamma_max)");

  NoiseSchedule s;
  s.eta_ = eta;
  s.alpha_bar_.resize(t_steps + 1);
  s.gamma_bar_.resize(t_steps + 1);
  s.alpha_.resize(t_steps);
  s.gamma_.resize(t_steps);
  s.alpha_bar_[0] = 1.0;
  s.gamma_bar_[0] = 0.0;
  for (int t = 1; t <= t_steps; ++t) {
    const double frac = static_cast<double>(t) / t_steps;
    s.alpha_bar_[t] = 1.0 - (1.0 - alpha_min) * frac;
    s.gamma_bar_[t] = gamma_max * frac;
    s.alpha_[t - 1] = s.alpha_bar_[t] / s.alpha_bar_[t - 1];
    s.gamma_[t - 1] = (s.gamma_bar_[t] - s.gamma_bar_[t - 1]) / (1.0 - s.gamma_bar_[t - 1]);
    if (1.0 - s.alpha_[t - 1] - s.gamma_[t - 1] < 0.0)
      throw ScheduleError("negative residual transition mass at step " + std::to_string(t));
  }
  s.validate();
  return s;
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha, std::vector<double> gamma, double eta)
    : alpha_(std::move(alpha)), gamma_(std::move(gamma)), eta_(eta) {
  if (alpha_.empty() || alpha_.size() != gamma_.size())
    throw ParameterError("alpha and gamma must be non-empty and equally sized");
  const int t_steps = static_cast<int>(alpha_.size());
  alpha_bar_.resize(t_steps + 1);
  gamma_bar_.resize(t_steps + 1);
  alpha_bar_[0] = 1.0;
  gamma_bar_[0] = 0.0;
  for (int t = 1; t <= t_steps; ++t) {
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t - 1];
    gamma_bar_[t] = gamma_[t - 1] + (1.0 - gamma_[t - 1]) * gamma_bar_[t - 1];
  }
  validate();
}

int NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps())
    throw ParameterError("step " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  return t;
}

int NoiseSchedule::check_cumulative_step(int t) const {
  if (t < 0 || t > steps())
    throw ParameterError("step " + std::to_string(t) + " outside 0.." + std::to_string(steps()));
  return t;
}

void NoiseSchedule::validate() const {
  for (int t = 1; t <= steps(); ++t) {
    const double a = alpha_[t - 1];
    const double g = gamma_[t - 1];
    if (!(a > 0.0 && a <= 1.0))
      throw ScheduleError("alpha at step " + std::to_string(t) + " outside (0, 1]");
    if (!(g >= 0.0 && g < 1.0))
      throw ScheduleError("gamma at step " + std::to_string(t) + " outside [0, 1)");
    if (a + g > 1.0)
      throw ScheduleError("negative residual transition mass at step " + std::to_string(t));
    if (alpha_bar_[t] + gamma_bar_[t] > 1.0 + 1e-12)
      throw ScheduleError("cumulative mass exceeds 1 at step " + std::to_string(t));
  }
}

namespace {

void check_matrix_step(const NoiseSchedule& sched, int t) {
  if (t < 1 || t > sched.steps())
    throw ParameterError("step " + std::to_string(t) + " outside 1.." +
                         std::to_string(sched.steps()));
}

// Shared layout: token block filled by the caller, then the absorbing
// MASK row/column.
void fill_mask_structure(Eigen::MatrixXd& q, int k, double gamma) {
  for (int j = 0; j < k; ++j) q(k, j) = gamma;
  q.col(k).setZero();
  q(k, k) = 1.0;
}

/// Replacement mass per distance rank d = 1..K (returned 0-indexed):
/// (1 - gamma - alpha) * softmax_d(eta * t/T * d/K).
std::vector<double> beta_by_rank(const NoiseSchedule& sched, int t, int k) {
  const double residual = 1.0 - sched.gamma(t) - sched.alpha(t);
  const double scale = sched.eta() * (static_cast<double>(t) / sched.steps()) / k;
  std::vector<double> w(k);
  const double max_arg = std::max(scale, scale * k);  // linear in d, take the endpoints
  double denom = 0.0;
  for (int d = 1; d <= k; ++d) {
    w[d - 1] = std::exp(scale * d - max_arg);
    denom += w[d - 1];
  }
  for (int d = 1; d <= k; ++d) w[d - 1] = residual * (w[d - 1] / denom);
  return w;
}

}  // namespace

TransitionMatrix uniform_transition_matrix(const NoiseSchedule& sched, int t, int num_tokens) {
  check_matrix_step(sched, t);
  if (num_tokens < 1) throw ParameterError("transition matrix needs at least one token");
  const int k = num_tokens;
  const double alpha = sched.alpha(t);
  const double gamma = sched.gamma(t);
  const double beta = (1.0 - alpha - gamma) / k;

  TransitionMatrix m;
  m.num_tokens = k;
  m.probs.resize(k + 1, k + 1);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) m.probs(i, j) = (i == j) ? alpha + beta : beta;
  fill_mask_structure(m.probs, k, gamma);
  return m;
}

TransitionMatrix dynamic_transition_matrix(const NoiseSchedule& sched, int t,
                                           const RankMatrix& ranks) {
  check_matrix_step(sched, t);
  const int k = ranks.size();
  const double alpha = sched.alpha(t);
  const std::vector<double> beta = beta_by_rank(sched, t, k);

  // Every column's ranks are a permutation of 1..K, so one softmax serves
  // all columns.
  TransitionMatrix m;
  m.num_tokens = k;
  m.probs.resize(k + 1, k + 1);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      m.probs(i, j) = beta[ranks.ranks(i, j) - 1] + (i == j ? alpha : 0.0);
  fill_mask_structure(m.probs, k, sched.gamma(t));
  return m;
}

TransitionModel::TransitionModel(NoiseSchedule sched, int num_tokens, bool uniform)
    : schedule_(std::move(sched)), num_tokens_(num_tokens), uniform_(uniform) {}

TransitionModel TransitionModel::uniform(const NoiseSchedule& sched, int num_tokens) {
  TransitionModel model(sched, num_tokens, true);
  model.build_steps(nullptr);
  model.build_cumulative();
  return model;
}

TransitionModel TransitionModel::dynamic(const NoiseSchedule& sched, const RankMatrix& ranks) {
  TransitionModel model(sched, ranks.size(), false);
  model.build_steps(&ranks);
  model.build_cumulative();
  return model;
}

void TransitionModel::build_steps(const RankMatrix* ranks) {
  const int t_steps = schedule_.steps();
  steps_.reserve(t_steps);
  for (int t = 1; t <= t_steps; ++t)
    steps_.push_back(ranks ? dynamic_transition_matrix(schedule_, t, *ranks)
                           : uniform_transition_matrix(schedule_, t, num_tokens_));
}

void TransitionModel::build_cumulative() {
  const int t_steps = schedule_.steps();
  const int k = num_tokens_;
  cumulative_.reserve(t_steps);
  if (uniform_) {
    // The uniform chain has a closed cumulative form: alpha_bar on the
    // diagonal, the residual spread evenly, gamma_bar in the MASK row.
    // Using it keeps the MASK mass equal to gamma_bar to the last bit.
    for (int t = 1; t <= t_steps; ++t) {
      const double ab = schedule_.alpha_bar(t);
      const double gb = schedule_.gamma_bar(t);
      const double bb = (1.0 - ab - gb) / k;
      TransitionMatrix m;
      m.num_tokens = k;
      m.probs.resize(k + 1, k + 1);
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) m.probs(i, j) = (i == j) ? ab + bb : bb;
      fill_mask_structure(m.probs, k, gb);
      cumulative_.push_back(std::move(m));
    }
    return;
  }
  // No closed form with rank-dependent replacement: explicit cached
  // products, O(T K^3) once per configuration.
  for (int t = 1; t <= t_steps; ++t) {
    TransitionMatrix m;
    m.num_tokens = k;
    m.probs = (t == 1) ? steps_[0].probs
                       : Eigen::MatrixXd(steps_[t - 1].probs * cumulative_[t - 2].probs);
    cumulative_.push_back(std::move(m));
  }
}

const TransitionMatrix& TransitionModel::step(int t) const {
  if (t < 1 || t > schedule_.steps())
    throw ParameterError("step " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule_.steps()));
  return steps_[t - 1];
}

const TransitionMatrix& TransitionModel::cumulative(int t) const {
  if (t < 1 || t > schedule_.steps())
    throw ParameterError("step " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule_.steps()));
  return cumulative_[t - 1];
}

Eigen::VectorXd TransitionModel::posterior(int z_t_state, int32_t z0_token, int t) const {
  if (t < 1 || t > schedule_.steps())
    throw ParameterError("posterior step " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule_.steps()));
  if (z_t_state < 0 || z_t_state > num_tokens_)
    throw ParameterError("z_t state " + std::to_string(z_t_state) + " out of range");
  if (z0_token == kMaskToken) throw InvalidStateError("z0 may not be MASK in the posterior");
  if (z0_token < 0 || z0_token >= num_tokens_)
    throw ParameterError("z0 token " + std::to_string(z0_token) + " out of range");

  const Eigen::MatrixXd& q_t = steps_[t - 1].probs;
  Eigen::VectorXd result(num_tokens_ + 1);
  if (t == 1) {
    // Cumulative at t-1 is the identity: a point mass on z0 whenever the
    // step itself can reach z_t from z0.
    for (int i = 0; i <= num_tokens_; ++i) result(i) = (i == z0_token) ? q_t(z_t_state, i) : 0.0;
  } else {
    const Eigen::MatrixXd& cum_prev = cumulative_[t - 2].probs;
    for (int i = 0; i <= num_tokens_; ++i) result(i) = q_t(z_t_state, i) * cum_prev(i, z0_token);
  }
  const double normalizer = result.sum();
  if (!(normalizer > 1e-300))
    throw UnreachableStateError("state " + std::to_string(z_t_state) +
                                " unreachable from token " + std::to_string(z0_token) +
                                " at step " + std::to_string(t));
  return result / normalizer;
}

TokenSequence TransitionModel::forward_sample(const TokenSequence& z0, int t,
                                              RngStream& rng) const {
  if (t < 1 || t > schedule_.steps())
    throw ParameterError("step " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule_.steps()));
  if (z0.contains_mask()) throw InvalidStateError("forward corruption input contains MASK");

  const Eigen::MatrixXd& cum = cumulative_[t - 1].probs;
  TokenSequence z_t = z0;
  std::vector<double> column(num_tokens_ + 1);
  for (int64_t p = 0; p < z0.size(); ++p) {
    const int32_t tok = z0.tokens[p];
    if (tok < 0 || tok >= num_tokens_)
      throw ParameterError("token " + std::to_string(tok) + " out of range");
    for (int i = 0; i <= num_tokens_; ++i) column[i] = cum(i, tok);
    z_t.tokens[p] = token_of(rng.next_categorical(column));
  }
  return z_t;
}

}  // namespace tokendiff
