#include "tokendiff/denoiser.hpp"

#include <cmath>
#include <string>

namespace tokendiff {

OracleDenoiser::OracleDenoiser(std::vector<int32_t> truth, int num_tokens)
    : truth_(std::move(truth)), num_tokens_(num_tokens) {
  for (int32_t tok : truth_)
    if (tok < 0 || tok >= num_tokens_)
      throw ParameterError("oracle truth token out of range");
}

Eigen::MatrixXd OracleDenoiser::predict(std::span<const int32_t> tokens,
                                        std::span<const int32_t> /*conditions*/,
                                        std::span<const int32_t> /*offsets*/, int /*t*/) const {
  if (tokens.size() > truth_.size())
    throw ParameterError("oracle truth does not cover all " + std::to_string(tokens.size()) +
                         " positions");
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<int64_t>(tokens.size()), num_tokens_);
  for (int64_t p = 0; p < static_cast<int64_t>(tokens.size()); ++p) rows(p, truth_[p]) = 1.0;
  return rows;
}

TabularDenoiser::TabularDenoiser(int condition_vocab, int step_buckets, int num_tokens,
                                 int t_steps)
    : condition_vocab_(condition_vocab),
      step_buckets_(step_buckets),
      num_tokens_(num_tokens),
      t_steps_(t_steps) {
  if (condition_vocab < 0) throw ParameterError("condition vocabulary must be >= 0");
  if (step_buckets < 1) throw ParameterError("need at least one step bucket");
  if (num_tokens < 2) throw ParameterError("need at least two tokens");
  if (t_steps < 1) throw ParameterError("need at least one diffusion step");
  const int64_t contexts = static_cast<int64_t>(condition_vocab_ + 1) * step_buckets_ *
                           (num_tokens_ + 1) * (num_tokens_ + 2) * (num_tokens_ + 2);
  params_.assign(contexts * num_tokens_, 0.0);
}

int TabularDenoiser::bucket_of(int t) const {
  if (t < 1 || t > t_steps_)
    throw ParameterError("step " + std::to_string(t) + " outside 1.." + std::to_string(t_steps_));
  const int64_t b = static_cast<int64_t>(t - 1) * step_buckets_ / t_steps_;
  return static_cast<int>(b);
}

int64_t TabularDenoiser::param_index(int cond, int bucket, int cur_state, int left_state,
                                     int right_state, int k) const {
  int64_t idx = cond;
  idx = idx * step_buckets_ + bucket;
  idx = idx * (num_tokens_ + 1) + cur_state;
  idx = idx * (num_tokens_ + 2) + left_state;
  idx = idx * (num_tokens_ + 2) + right_state;
  idx = idx * num_tokens_ + k;
  return idx;
}

Eigen::VectorXd TabularDenoiser::logits_for(int cond, int bucket, int cur_state, int left_state,
                                            int right_state) const {
  Eigen::VectorXd logits(num_tokens_);
  const int64_t base = param_index(kNullCondition, bucket, cur_state, left_state, right_state, 0);
  for (int k = 0; k < num_tokens_; ++k) logits(k) = params_[base + k];
  if (cond != kNullCondition) {
    const int64_t offset = param_index(cond, bucket, cur_state, left_state, right_state, 0);
    for (int k = 0; k < num_tokens_; ++k) logits(k) += params_[offset + k];
  }
  return logits;
}

int TabularDenoiser::neighbor_feature(std::span<const int32_t> tokens, int64_t pos,
                                      int delta) const {
  const int64_t n = static_cast<int64_t>(tokens.size());
  const int64_t q = pos + delta;
  if (q < 0 || q >= n) return edge_feature();
  return state_feature(tokens[q]);
}

Eigen::MatrixXd TabularDenoiser::predict(std::span<const int32_t> tokens,
                                         std::span<const int32_t> conditions,
                                         std::span<const int32_t> /*offsets*/, int t) const {
  const int64_t n = static_cast<int64_t>(tokens.size());
  if (static_cast<int64_t>(conditions.size()) != n)
    throw ParameterError("condition count does not match position count");
  const int bucket = bucket_of(t);

  Eigen::MatrixXd rows(n, num_tokens_);
  for (int64_t p = 0; p < n; ++p) {
    const int32_t cond = conditions[p];
    if (cond < 0 || cond > condition_vocab_)
      throw ParameterError("condition id " + std::to_string(cond) + " outside 0.." +
                           std::to_string(condition_vocab_));
    const int32_t tok = tokens[p];
    if (tok != kMaskToken && (tok < 0 || tok >= num_tokens_))
      throw ParameterError("token " + std::to_string(tok) + " out of range");

    Eigen::VectorXd logits =
        logits_for(cond, bucket, state_feature(tok), neighbor_feature(tokens, p, -1),
                   neighbor_feature(tokens, p, +1));
    const double max_logit = logits.maxCoeff();
    Eigen::VectorXd exps = (logits.array() - max_logit).exp();
    rows.row(p) = (exps / exps.sum()).transpose();
  }
  return rows;
}

}  // namespace tokendiff
