#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "tokendiff/sequence.hpp"

namespace tokendiff {

/// Contract for p(z0 | z_t, y): given the current (possibly masked) tokens,
/// per-position conditions and segment-relative offsets, return one
/// probability row over the K real tokens per position. Rows sum to 1 and
/// never place mass on MASK. Implementations must be pure functions of
/// their arguments.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int num_tokens() const = 0;

  virtual Eigen::MatrixXd predict(std::span<const int32_t> tokens,
                                  std::span<const int32_t> conditions,
                                  std::span<const int32_t> offsets, int t) const = 0;
};

/// Test denoiser: a point mass on the known ground-truth token at every
/// position, regardless of corruption, step or condition. Truth is indexed
/// by position within the queried span, so it is meant for single-sequence
/// chains.
class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(std::vector<int32_t> truth, int num_tokens);

  int num_tokens() const override { return num_tokens_; }

  Eigen::MatrixXd predict(std::span<const int32_t> tokens, std::span<const int32_t> conditions,
                          std::span<const int32_t> offsets, int t) const override;

 private:
  std::vector<int32_t> truth_;
  int num_tokens_;
};

/// Trainable lookup denoiser. Each position's context is
/// (condition, step bucket, current state, left neighbor, right neighbor);
/// the table maps a context to K logits, softmaxed into the prediction.
///
/// Neighbor coupling is what lets jointly denoised segments influence each
/// other across boundaries. Feature encoding: token -> itself, MASK -> K,
/// sequence edge -> K+1 (neighbors only). The null-condition row is a shared
/// baseline; rows for real conditions are additive offsets on top of it, so
/// a model that never saw a condition predicts exactly like the
/// unconditional one.
///
/// Segment-relative offsets are accepted but unused; they are reserved for
/// denoisers with positional structure.
class TabularDenoiser : public Denoiser {
 public:
  TabularDenoiser(int condition_vocab, int step_buckets, int num_tokens, int t_steps);

  int num_tokens() const override { return num_tokens_; }
  int condition_vocab() const { return condition_vocab_; }
  int step_buckets() const { return step_buckets_; }
  int t_steps() const { return t_steps_; }

  int mask_feature() const { return num_tokens_; }
  int edge_feature() const { return num_tokens_ + 1; }

  int bucket_of(int t) const;

  int64_t param_count() const { return static_cast<int64_t>(params_.size()); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Flat parameter index. cond 0 addresses the shared baseline row.
  int64_t param_index(int cond, int bucket, int cur_state, int left_state, int right_state,
                      int k) const;

  /// Effective logits for one context: baseline plus the condition offset.
  Eigen::VectorXd logits_for(int cond, int bucket, int cur_state, int left_state,
                             int right_state) const;

  Eigen::MatrixXd predict(std::span<const int32_t> tokens, std::span<const int32_t> conditions,
                          std::span<const int32_t> offsets, int t) const override;

  int state_feature(int32_t token) const { return token == kMaskToken ? num_tokens_ : token; }
  int neighbor_feature(std::span<const int32_t> tokens, int64_t pos, int delta) const;

 private:
  int condition_vocab_;
  int step_buckets_;
  int num_tokens_;
  int t_steps_;
  std::vector<double> params_;
};

}  // namespace tokendiff
