#include "tokendiff/training.hpp"

#include <cmath>
#include <string>

namespace tokendiff {
namespace {

struct PositionGrad {
  int64_t base_index;    // first logit of the baseline row for this context
  int64_t offset_index;  // first logit of the condition row, or -1 when null
  Eigen::VectorXd grad;  // d loss / d logit, length K
};

void scatter(std::map<int64_t, double>& into, const PositionGrad& pg, double weight) {
  for (int k = 0; k < pg.grad.size(); ++k) {
    const double g = weight * pg.grad(k);
    into[pg.base_index + k] += g;
    if (pg.offset_index >= 0) into[pg.offset_index + k] += g;
  }
}

}  // namespace

LossResult tabular_loss(const TabularDenoiser& model, std::span<const TrainingRecord> batch,
                        const TransitionModel& transitions, double lambda, RngStream& rng) {
  if (batch.empty()) throw ParameterError("loss needs a non-empty batch");
  if (lambda < 0.0) throw ParameterError("lambda must be >= 0");
  const int k = model.num_tokens();
  const int t_steps = transitions.schedule().steps();
  if (transitions.num_tokens() != k)
    throw ParameterError("transition model and denoiser disagree on token count");

  LossResult result;
  for (const TrainingRecord& record : batch) {
    if (record.tokens.empty()) throw ParameterError("training record has no tokens");
    TokenSequence z0 = TokenSequence::single(record.tokens, record.condition);
    const int t = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(t_steps)));
    const TokenSequence z_t = transitions.forward_sample(z0, t, rng);

    std::vector<int32_t> offsets(record.tokens.size());
    for (size_t p = 0; p < offsets.size(); ++p) offsets[p] = static_cast<int32_t>(p);
    const Eigen::MatrixXd rows = model.predict(z_t.tokens, z_t.conditions, offsets, t);

    const int bucket = model.bucket_of(t);
    const int64_t len = z0.size();
    const double pos_weight = 1.0 / (static_cast<double>(len) * batch.size());
    double record_value = 0.0;

    for (int64_t p = 0; p < len; ++p) {
      const int32_t true_token = record.tokens[p];
      const int state = transitions.state_of(z_t.tokens[p]);
      const Eigen::VectorXd p_row = rows.row(p).transpose();

      // Posterior columns for every candidate z0: A(i, j) = q(z_{t-1}=i | z_t, j).
      Eigen::MatrixXd post(k + 1, k);
      for (int j = 0; j < k; ++j) post.col(j) = transitions.posterior(state, j, t);
      const Eigen::VectorXd mixed = post * p_row;

      double vlb;
      Eigen::VectorXd vlb_grad(k);
      if (t == 1) {
        // Reconstruction term: the mixture at t=1 collapses onto the
        // prediction itself.
        vlb = -std::log(std::max(mixed(true_token), 1e-300));
        for (int j = 0; j < k; ++j) vlb_grad(j) = p_row(j) - (j == true_token ? 1.0 : 0.0);
      } else {
        const Eigen::VectorXd q_true = post.col(true_token);
        vlb = 0.0;
        Eigen::VectorXd ratio = Eigen::VectorXd::Zero(k + 1);
        for (int i = 0; i <= k; ++i) {
          if (q_true(i) <= 0.0) continue;
          const double m = std::max(mixed(i), 1e-300);
          vlb += q_true(i) * std::log(q_true(i) / m);
          ratio(i) = q_true(i) / m;
        }
        // d KL / d logit_k = p_k (g_k - sum_j p_j g_j) with g_j = -sum_i ratio_i A_ij.
        const Eigen::VectorXd g = -(post.transpose() * ratio);
        const double mean_g = p_row.dot(g);
        for (int j = 0; j < k; ++j) vlb_grad(j) = p_row(j) * (g(j) - mean_g);
      }

      const double ce = -std::log(std::max(p_row(true_token), 1e-300));
      record_value += vlb + lambda * ce;

      PositionGrad pg;
      pg.base_index = model.param_index(kNullCondition, bucket, model.state_feature(z_t.tokens[p]),
                                        model.neighbor_feature(z_t.tokens, p, -1),
                                        model.neighbor_feature(z_t.tokens, p, +1), 0);
      pg.offset_index =
          record.condition == kNullCondition
              ? -1
              : model.param_index(record.condition, bucket, model.state_feature(z_t.tokens[p]),
                                  model.neighbor_feature(z_t.tokens, p, -1),
                                  model.neighbor_feature(z_t.tokens, p, +1), 0);
      pg.grad = vlb_grad;
      for (int j = 0; j < k; ++j)
        pg.grad(j) += lambda * (p_row(j) - (j == true_token ? 1.0 : 0.0));
      scatter(result.gradients, pg, pos_weight);
    }
    result.value += record_value / static_cast<double>(len);
  }
  result.value /= static_cast<double>(batch.size());
  return result;
}

TrainResult train_tabular(TabularDenoiser& model, std::span<const TrainingRecord> dataset,
                          const TransitionModel& transitions, const TrainOptions& options) {
  if (dataset.empty()) throw ParameterError("training needs a non-empty dataset");
  if (options.epochs < 1) throw ParameterError("epochs must be >= 1");
  if (!(options.null_prob >= 0.0 && options.null_prob <= 1.0))
    throw ParameterError("null_prob must lie in [0, 1]");

  std::vector<TrainingRecord> working(dataset.begin(), dataset.end());
  RngStream rng(options.seed);
  TrainResult result;
  result.epoch_losses.reserve(options.epochs);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (size_t r = 0; r < working.size(); ++r) {
      working[r].condition =
          rng.next_bernoulli(options.null_prob) ? kNullCondition : dataset[r].condition;
    }
    const LossResult loss = tabular_loss(model, working, transitions, options.lambda, rng);
    if (!std::isfinite(loss.value))
      throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
    auto params = model.params();
    for (const auto& [index, grad] : loss.gradients)
      params[static_cast<size_t>(index)] -= options.learning_rate * grad;
    result.epoch_losses.push_back(loss.value);
  }
  return result;
}

}  // namespace tokendiff
