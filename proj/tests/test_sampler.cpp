#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "oracles.hpp"
#include "tokendiff/codebook.hpp"
#include "tokendiff/sampler.hpp"

using namespace tokendiff;
using namespace tokendiff::testing;

namespace {

TransitionModel small_transitions(int k, int t_steps, double eta, uint64_t seed,
                                  double gamma_max = 0.8, double alpha_min = 0.02) {
  const NoiseSchedule sched = NoiseSchedule::linear(t_steps, gamma_max, alpha_min, eta);
  if (eta == 0.0) return TransitionModel::uniform(sched, k);
  return TransitionModel::dynamic(
      sched, distance_rank_matrix(generate_synthetic_codebook(k, 2, 2, seed)));
}

/// Fixed-table test denoiser whose rows depend on the left neighbor token,
/// which is what gives the joint phase observable effect.
class NeighborDenoiser : public Denoiser {
 public:
  explicit NeighborDenoiser(int k) : k_(k) {}
  int num_tokens() const override { return k_; }
  Eigen::MatrixXd predict(std::span<const int32_t> tokens, std::span<const int32_t> conditions,
                          std::span<const int32_t> /*offsets*/, int /*t*/) const override {
    Eigen::MatrixXd rows(static_cast<int64_t>(tokens.size()), k_);
    for (int64_t p = 0; p < static_cast<int64_t>(tokens.size()); ++p) {
      const int left = (p == 0) ? k_ + 1
                                : (tokens[p - 1] == kMaskToken ? k_ : tokens[p - 1]);
      for (int j = 0; j < k_; ++j)
        rows(p, j) = 1.0 + ((j == (left + conditions[p]) % k_) ? 3.0 : 0.0);
      rows.row(p) /= rows.row(p).sum();
    }
    return rows;
  }

 private:
  int k_;
};

Eigen::MatrixXd log_rows(std::vector<std::vector<double>> rows) {
  Eigen::MatrixXd m(static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<int64_t>(r), static_cast<int64_t>(c)) = std::log(rows[r][c]);
  return m;
}

}  // namespace

TEST_CASE("guidance with s=0 returns the conditional rows bit-exactly") {
  const Eigen::MatrixXd cond = log_rows({{0.8, 0.2}, {0.3, 0.7}});
  const Eigen::MatrixXd uncond = log_rows({{0.5, 0.5}, {0.9, 0.1}});
  const Eigen::MatrixXd out = guided_log_probs(cond, uncond, 0.0);
  CHECK(out == cond);
}

TEST_CASE("guidance with cond == uncond is a fixed point for any scale") {
  const Eigen::MatrixXd cond = log_rows({{0.8, 0.15, 0.05}});
  for (double s : {0.5, 1.0, 2.0, 4.0, 10.0}) {
    const Eigen::MatrixXd out = guided_log_probs(cond, cond, s);
    CHECK((out - cond).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("guidance sharpens per the closed form at K=2") {
  const Eigen::MatrixXd cond = log_rows({{0.8, 0.2}});
  const Eigen::MatrixXd uncond = log_rows({{0.5, 0.5}});
  const Eigen::MatrixXd out = guided_log_probs(cond, uncond, 1.0);
  // unnormalized masses 0.8^2/0.5 and 0.2^2/0.5
  const double w0 = 0.64 / 0.5, w1 = 0.04 / 0.5;
  CHECK(std::exp(out(0, 0)) == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-12));
  CHECK(std::exp(out(0, 1)) == doctest::Approx(w1 / (w0 + w1)).epsilon(1e-12));
}

TEST_CASE("guidance rejects mismatched shapes and negative scales") {
  const Eigen::MatrixXd a = log_rows({{0.5, 0.5}});
  const Eigen::MatrixXd b = log_rows({{0.5, 0.25, 0.25}});
  CHECK_THROWS_AS(guided_log_probs(a, b, 1.0), ParameterError);
  CHECK_THROWS_AS(guided_log_probs(a, a, -1.0), ParameterError);
}

TEST_CASE("guidance stays finite when rows contain exact zeros") {
  Eigen::MatrixXd cond(1, 3), uncond(1, 3);
  cond << 0.0, -std::numeric_limits<double>::infinity(), std::log(0.5);
  uncond << std::log(0.25), -std::numeric_limits<double>::infinity(), std::log(0.75);
  const Eigen::MatrixXd out = guided_log_probs(cond, uncond, 2.0);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) total += std::exp(out(0, c));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reverse step with the oracle equals sampling the exact posterior") {
  const int k = 4;
  const TransitionModel transitions = small_transitions(k, 8, 0.5, 1);
  const std::vector<int32_t> truth = {1, 3, 0, 2};
  const OracleDenoiser oracle(truth, k);
  RngStream stream_a(42);
  RngStream stream_b(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = 2 + static_cast<int>(stream_a.next_u64() % 7);
    stream_b.next_u64();
    TokenSequence z_t = TokenSequence::single({2, kMaskToken, 0, kMaskToken}, 1);
    const TokenSequence via_step = reverse_step(z_t, t, oracle, transitions, 0.0, stream_a);
    TokenSequence direct = z_t;
    for (int64_t p = 0; p < z_t.size(); ++p) {
      const Eigen::VectorXd post =
          transitions.posterior(transitions.state_of(z_t.tokens[p]), truth[static_cast<size_t>(p)], t);
      const std::vector<double> weights(post.data(), post.data() + post.size());
      direct.tokens[p] = transitions.token_of(stream_b.next_categorical(weights));
    }
    CHECK(via_step.tokens == direct.tokens);
  }
}

TEST_CASE("reverse step at t=1 with the oracle restores the truth deterministically") {
  const int k = 5;
  const TransitionModel transitions = small_transitions(k, 6, 0.3, 2);
  const std::vector<int32_t> truth = {4, 0, 2};
  const OracleDenoiser oracle(truth, k);
  RngStream rng(7);
  const TokenSequence z1 = TokenSequence::single({kMaskToken, 3, kMaskToken}, 1);
  const TokenSequence out = reverse_step(z1, 1, oracle, transitions, 0.0, rng);
  CHECK(out.tokens == truth);
}

TEST_CASE("single-position reverse frequencies match the posterior mixture") {
  const int k = 3;
  const TransitionModel transitions = small_transitions(k, 5, 0.4, 3);
  // arbitrary fixed z0 distribution standing in for a denoiser row
  Eigen::VectorXd p_z0(k);
  p_z0 << 0.6, 0.1, 0.3;
  class FixedDenoiser : public Denoiser {
   public:
    FixedDenoiser(Eigen::VectorXd row, int k) : row_(std::move(row)), k_(k) {}
    int num_tokens() const override { return k_; }
    Eigen::MatrixXd predict(std::span<const int32_t> tokens, std::span<const int32_t>,
                            std::span<const int32_t>, int) const override {
      Eigen::MatrixXd rows(static_cast<int64_t>(tokens.size()), k_);
      for (int64_t p = 0; p < rows.rows(); ++p) rows.row(p) = row_.transpose();
      return rows;
    }
   private:
    Eigen::VectorXd row_;
    int k_;
  } denoiser(p_z0, k);

  const int t = 3;
  const int z_t_state = transitions.mask_state();
  Eigen::VectorXd mixture = Eigen::VectorXd::Zero(k + 1);
  for (int j = 0; j < k; ++j) mixture += p_z0(j) * transitions.posterior(z_t_state, j, t);

  RngStream rng(11);
  const int64_t n = 100000;
  std::vector<int64_t> counts(static_cast<size_t>(k) + 1, 0);
  const TokenSequence z_t = TokenSequence::single({kMaskToken}, 1);
  for (int64_t i = 0; i < n; ++i) {
    const TokenSequence out = reverse_step(z_t, t, denoiser, transitions, 0.0, rng);
    counts[static_cast<size_t>(transitions.state_of(out.tokens[0]))]++;
  }
  for (int state = 0; state <= k; ++state) {
    const double p = mixture(state);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::abs(static_cast<double>(counts[static_cast<size_t>(state)]) / n - p) <=
          3.0 * sigma + 1e-6);
  }
}

TEST_CASE("one-step chain with the oracle emits the truth") {
  const int k = 4;
  const TransitionModel transitions = small_transitions(k, 1, 0.0, 4, 0.5, 0.25);
  const std::vector<int32_t> truth = {2, 2, 0, 1, 3};
  const OracleDenoiser oracle(truth, k);
  RngStream rng(1);
  const TokenSequence out = generate_single(1, 5, oracle, transitions, 0.0, rng);
  CHECK(out.tokens == truth);
}

TEST_CASE("generation is bit-deterministic per seed") {
  const int k = 6;
  const TransitionModel transitions = small_transitions(k, 12, 0.5, 5);
  const NeighborDenoiser denoiser(k);
  RngStream a(33);
  RngStream b(33);
  const TokenSequence out_a = generate_single(1, 9, denoiser, transitions, 2.0, a);
  const TokenSequence out_b = generate_single(1, 9, denoiser, transitions, 2.0, b);
  CHECK(out_a.tokens == out_b.tokens);
  RngStream c(34);
  const TokenSequence out_c = generate_single(1, 9, denoiser, transitions, 2.0, c);
  CHECK(out_a.tokens != out_c.tokens);
}

TEST_CASE("chains never emit MASK") {
  const int k = 5;
  const TransitionModel transitions = small_transitions(k, 10, 0.7, 6);
  const NeighborDenoiser denoiser(k);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    const TokenSequence out = generate_single(1, 6, denoiser, transitions, 1.0, rng);
    CHECK_FALSE(out.contains_mask());
  }
}

TEST_CASE("oracle chains over a two-sequence mixture match the truth distribution") {
  const int k = 4;
  const TransitionModel transitions = small_transitions(k, 6, 0.4, 7);
  const std::vector<int32_t> seq_a = {0, 1, 2, 3};
  const std::vector<int32_t> seq_b = {3, 2, 1, 0};
  const int64_t n = 10000;
  std::map<std::vector<int32_t>, int64_t> counts;
  RngStream root(99);
  for (int64_t i = 0; i < n; ++i) {
    RngStream rng = root.substream(static_cast<uint64_t>(i));
    const bool pick_a = rng.next_bernoulli(0.5);
    const OracleDenoiser oracle(pick_a ? seq_a : seq_b, k);
    const TokenSequence out = generate_single(1, 4, oracle, transitions, 0.0, rng);
    counts[out.tokens]++;
  }
  const std::map<std::vector<int32_t>, double> exact = {{seq_a, 0.5}, {seq_b, 0.5}};
  CHECK(total_variation(counts, n, exact) <= 0.05);
}

TEST_CASE("two-phase sampling with t_independent = T matches per-segment chains bit-exactly") {
  const int k = 6;
  const TransitionModel transitions = small_transitions(k, 10, 0.5, 8);
  const NeighborDenoiser denoiser(k);
  for (uint64_t seed = 0; seed < 25; ++seed) {
    for (const int n_segments : {2, 4}) {
      GenerationPlan plan;
      for (int i = 0; i < n_segments; ++i)
        plan.segments.push_back({1 + i % 2, 4 + (i % 3)});
      plan.t_independent = 10;
      plan.guidance = 2.0;
      plan.seed = seed;
      const TokenSequence multi = generate_multi(plan, denoiser, transitions);

      std::vector<int32_t> expected;
      const RngStream root(seed);
      for (size_t i = 0; i < plan.segments.size(); ++i) {
        RngStream rng = root.substream(i + 1);
        const TokenSequence seg = generate_single(plan.segments[i].condition,
                                                  plan.segments[i].length, denoiser, transitions,
                                                  plan.guidance, rng);
        expected.insert(expected.end(), seg.tokens.begin(), seg.tokens.end());
      }
      CHECK(multi.tokens == expected);
    }
  }
}

TEST_CASE("a single-segment plan reduces to generate_single for any split") {
  const int k = 5;
  const TransitionModel transitions = small_transitions(k, 8, 0.4, 9);
  const NeighborDenoiser denoiser(k);
  for (const int t_independent : {0, 3, 8}) {
    GenerationPlan plan;
    plan.segments = {{2, 7}};
    plan.t_independent = t_independent;
    plan.guidance = 1.5;
    plan.seed = 77;
    const TokenSequence multi = generate_multi(plan, denoiser, transitions);
    CHECK(multi.boundaries == std::vector<int64_t>{7});
    CHECK_FALSE(multi.contains_mask());
    if (t_independent == 8) {
      RngStream rng = RngStream(77).substream(1);
      const TokenSequence single = generate_single(2, 7, denoiser, transitions, 1.5, rng);
      CHECK(multi.tokens == single.tokens);
    }
  }
}

TEST_CASE("the joint phase changes outcomes for a neighbor-sensitive denoiser") {
  const int k = 6;
  const TransitionModel transitions = small_transitions(k, 10, 0.5, 10);
  const NeighborDenoiser denoiser(k);
  int differing = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    GenerationPlan plan;
    plan.segments = {{1, 5}, {2, 5}};
    plan.guidance = 1.0;
    plan.seed = seed;
    plan.t_independent = 10;
    const TokenSequence independent = generate_multi(plan, denoiser, transitions);
    plan.t_independent = 0;  // fully joint
    const TokenSequence joint = generate_multi(plan, denoiser, transitions);
    differing += independent.tokens != joint.tokens;
  }
  CHECK(differing > 0);
}

TEST_CASE("multi-segment output carries boundaries and per-segment conditions") {
  const int k = 4;
  const TransitionModel transitions = small_transitions(k, 6, 0.3, 11);
  const NeighborDenoiser denoiser(k);
  GenerationPlan plan;
  plan.segments = {{1, 3}, {2, 4}, {1, 2}};
  plan.t_independent = 4;
  plan.guidance = 0.0;
  plan.seed = 5;
  const TokenSequence out = generate_multi(plan, denoiser, transitions);
  out.validate();
  CHECK(out.boundaries == std::vector<int64_t>{3, 7, 9});
  CHECK(out.conditions[0] == 1);
  CHECK(out.conditions[4] == 2);
  CHECK(out.conditions[8] == 1);
}
