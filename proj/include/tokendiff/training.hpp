#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "tokendiff/denoiser.hpp"
#include "tokendiff/rng.hpp"
#include "tokendiff/schedule.hpp"

namespace tokendiff {

struct TrainingRecord {
  std::vector<int32_t> tokens;
  int32_t condition = kNullCondition;
};

/// Loss value plus its analytic gradient, sparse over the touched
/// parameter indices of the tabular model.
struct LossResult {
  double value = 0.0;
  std::map<int64_t, double> gradients;
};

/// Variational objective: per record one step t is drawn uniformly from
/// 1..T and z_t sampled from q(z_t | z_0); the VLB term is the KL between
/// the exact posterior and the model's mixed reverse distribution for
/// t > 1, and the reconstruction cross-entropy at t = 1. The auxiliary
/// denoising term -log p(z0 | z_t, y) is added with coefficient lambda.
/// Terms are averaged over positions and records. Identical rng streams
/// reproduce identical corruption draws, so the result is a deterministic
/// function of (model, batch, rng state) and finite differences on the
/// parameters are well defined.
LossResult tabular_loss(const TabularDenoiser& model, std::span<const TrainingRecord> batch,
                        const TransitionModel& transitions, double lambda, RngStream& rng);

struct TrainOptions {
  int epochs = 200;
  double learning_rate = 0.1;
  double null_prob = 0.1;  // per-record chance per step of training unconditionally
  double lambda = 5e-4;
  uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_losses;
};

/// Full-batch gradient descent on the tabular model. Each step replaces a
/// record's condition by the null condition with probability null_prob.
/// Deterministic given options.seed. Throws TrainingError (naming the
/// epoch) if the loss becomes non-finite.
TrainResult train_tabular(TabularDenoiser& model, std::span<const TrainingRecord> dataset,
                          const TransitionModel& transitions, const TrainOptions& options);

}  // namespace tokendiff
