#include "tokendiff/sampler.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace tokendiff {
namespace {

// Log of the smallest normal double; zero probabilities are floored here
// before guidance extrapolation so the combination stays finite.
constexpr double kLogFloor = -708.0;

double safe_log(double p) { return p > 0.0 ? std::max(std::log(p), kLogFloor) : kLogFloor; }

std::vector<int32_t> segment_offsets(const TokenSequence& seq) {
  std::vector<int32_t> offsets(static_cast<size_t>(seq.size()));
  int64_t begin = 0;
  int64_t seg = 0;
  for (int64_t p = 0; p < seq.size(); ++p) {
    while (p >= seq.boundaries[seg]) begin = seq.boundaries[seg++];
    offsets[p] = static_cast<int32_t>(p - begin);
  }
  return offsets;
}

/// Per-position guided z0 distribution (probability domain).
Eigen::MatrixXd guided_predictions(const TokenSequence& z_t, const Denoiser& denoiser,
                                   const std::vector<int32_t>& offsets, int t, double s) {
  const Eigen::MatrixXd cond = denoiser.predict(z_t.tokens, z_t.conditions, offsets, t);
  if (s == 0.0) return cond;

  const std::vector<int32_t> nulls(static_cast<size_t>(z_t.size()), kNullCondition);
  const Eigen::MatrixXd uncond = denoiser.predict(z_t.tokens, nulls, offsets, t);
  const Eigen::MatrixXd guided_log =
      guided_log_probs(cond.array().unaryExpr([](double p) { return safe_log(p); }).matrix(),
                       uncond.array().unaryExpr([](double p) { return safe_log(p); }).matrix(), s);
  return guided_log.array().exp().matrix();
}

}  // namespace

Eigen::MatrixXd guided_log_probs(const Eigen::MatrixXd& cond_log, const Eigen::MatrixXd& uncond_log,
                                 double s) {
  if (cond_log.rows() != uncond_log.rows() || cond_log.cols() != uncond_log.cols())
    throw ParameterError("conditional and unconditional shapes differ");
  if (s < 0.0) throw ParameterError("guidance scale must be >= 0");
  if (s == 0.0) return cond_log;

  Eigen::MatrixXd out(cond_log.rows(), cond_log.cols());
  for (int64_t r = 0; r < cond_log.rows(); ++r) {
    double max_val = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < cond_log.cols(); ++c) {
      const double lc = std::max(cond_log(r, c), kLogFloor);
      const double lu = std::max(uncond_log(r, c), kLogFloor);
      out(r, c) = (s + 1.0) * lc - s * lu;
      max_val = std::max(max_val, out(r, c));
    }
    double denom = 0.0;
    for (int64_t c = 0; c < cond_log.cols(); ++c) denom += std::exp(out(r, c) - max_val);
    const double log_denom = max_val + std::log(denom);
    for (int64_t c = 0; c < cond_log.cols(); ++c) out(r, c) -= log_denom;
  }
  return out;
}

TokenSequence reverse_step(const TokenSequence& z_t, int t, const Denoiser& denoiser,
                           const TransitionModel& transitions, double s, RngStream& rng) {
  const int t_steps = transitions.schedule().steps();
  if (t < 1 || t > t_steps)
    throw ParameterError("step " + std::to_string(t) + " outside 1.." + std::to_string(t_steps));
  const int k = transitions.num_tokens();
  if (denoiser.num_tokens() != k)
    throw ParameterError("denoiser and transition model disagree on token count");

  const std::vector<int32_t> offsets = segment_offsets(z_t);
  const Eigen::MatrixXd z0_probs = guided_predictions(z_t, denoiser, offsets, t, s);

  TokenSequence z_prev = z_t;
  std::vector<double> mixture(static_cast<size_t>(k) + 1);
  for (int64_t p = 0; p < z_t.size(); ++p) {
    const int state = transitions.state_of(z_t.tokens[p]);
    std::fill(mixture.begin(), mixture.end(), 0.0);
    for (int j = 0; j < k; ++j) {
      const double w = z0_probs(p, j);
      if (w <= 0.0) continue;
      Eigen::VectorXd post;
      try {
        post = transitions.posterior(state, j, t);
      } catch (const UnreachableStateError& err) {
        throw UnreachableStateError(std::string(err.what()) + " (position " + std::to_string(p) +
                                    ", step " + std::to_string(t) + ")");
      }
      for (int i = 0; i <= k; ++i) mixture[i] += w * post(i);
    }
    z_prev.tokens[p] = transitions.token_of(rng.next_categorical(mixture));
  }
  return z_prev;
}

TokenSequence generate_single(int32_t condition, int64_t length, const Denoiser& denoiser,
                              const TransitionModel& transitions, double s, RngStream& rng) {
  if (length < 1) throw ParameterError("generation length must be >= 1");
  TokenSequence z = TokenSequence::single(std::vector<int32_t>(length, kMaskToken), condition);
  for (int t = transitions.schedule().steps(); t >= 1; --t)
    z = reverse_step(z, t, denoiser, transitions, s, rng);
  if (z.contains_mask())
    throw SamplingError("residual MASK after the reverse chain (denoiser support bug)");
  return z;
}

TokenSequence generate_multi(const GenerationPlan& plan, const Denoiser& denoiser,
                             const TransitionModel& transitions) {
  const int t_steps = transitions.schedule().steps();
  plan.validate(t_steps);
  const RngStream root(plan.seed);

  // z_T: absorbing prior, every position MASK.
  TokenSequence joint;
  for (const PlanSegment& seg : plan.segments) {
    joint.tokens.insert(joint.tokens.end(), static_cast<size_t>(seg.length), kMaskToken);
    joint.conditions.insert(joint.conditions.end(), static_cast<size_t>(seg.length),
                            seg.condition);
    joint.boundaries.push_back(joint.size());
  }

  // Phase 1, steps T..t_independent+1: the concatenation is denoised as one
  // sequence; neighbor context crosses segment boundaries.
  RngStream joint_rng = root.substream(0);
  for (int t = t_steps; t > plan.t_independent; --t)
    joint = reverse_step(joint, t, denoiser, transitions, plan.guidance, joint_rng);

  // Phase 2, steps t_independent..1: each segment in isolation on its own
  // substream (numbered from 1), truncating neighbor context at its edges.
  TokenSequence result;
  for (size_t i = 0; i < plan.segments.size(); ++i) {
    const int64_t begin = joint.segment_begin(static_cast<int64_t>(i));
    const int64_t end = joint.segment_end(static_cast<int64_t>(i));
    TokenSequence segment = TokenSequence::single(
        std::vector<int32_t>(joint.tokens.begin() + begin, joint.tokens.begin() + end),
        plan.segments[i].condition);
    RngStream seg_rng = root.substream(i + 1);
    for (int t = plan.t_independent; t >= 1; --t)
      segment = reverse_step(segment, t, denoiser, transitions, plan.guidance, seg_rng);
    result.tokens.insert(result.tokens.end(), segment.tokens.begin(), segment.tokens.end());
    result.conditions.insert(result.conditions.end(), segment.conditions.begin(),
                             segment.conditions.end());
    result.boundaries.push_back(result.size());
  }

  if (result.contains_mask())
    throw SamplingError("residual MASK after two-phase sampling (denoiser support bug)");
  return result;
}

}  // namespace tokendiff
