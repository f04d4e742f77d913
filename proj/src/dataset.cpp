#include "tokendiff/dataset.hpp"

#include <cmath>
#include <numbers>

#include "tokendiff/rng.hpp"

namespace tokendiff {

std::vector<TrainingRecord> make_synthetic_dataset(const Codebook& cb, int conditions,
                                                   int sequences_per_condition,
                                                   int tokens_per_sequence, uint64_t seed) {
  if (conditions < 1) throw ParameterError("need at least one condition");
  if (sequences_per_condition < 1) throw ParameterError("need at least one sequence per condition");
  if (tokens_per_sequence < 1) throw ParameterError("need at least one token per sequence");

  const int dim = cb.dim();
  const Eigen::VectorXd lo = cb.entries.colwise().minCoeff();
  const Eigen::VectorXd hi = cb.entries.colwise().maxCoeff();
  const Eigen::VectorXd mid = 0.5 * (lo + hi);
  const Eigen::VectorXd amp = 0.5 * (hi - lo);

  RngStream rng(seed);
  std::vector<TrainingRecord> records;
  records.reserve(static_cast<size_t>(conditions) * sequences_per_condition);
  Eigen::VectorXd point(dim);
  for (int cond = 1; cond <= conditions; ++cond) {
    // Per-condition frequency and phase make the condition identifiable
    // from the visited token pattern.
    const double freq = static_cast<double>(cond);
    const double cond_phase = 2.0 * std::numbers::pi * (cond - 1) / conditions;
    RngStream cond_rng = rng.substream(static_cast<uint64_t>(cond));
    for (int s = 0; s < sequences_per_condition; ++s) {
      const double jitter = 0.2 * cond_rng.next_double();
      TrainingRecord rec;
      rec.condition = cond;
      rec.tokens.reserve(static_cast<size_t>(tokens_per_sequence));
      for (int tau = 0; tau < tokens_per_sequence; ++tau) {
        const double phase =
            2.0 * std::numbers::pi * (freq * tau / tokens_per_sequence + jitter) + cond_phase;
        for (int d = 0; d < dim; ++d)
          point(d) = mid(d) + amp(d) * std::sin(phase + 2.0 * std::numbers::pi * d / dim);
        rec.tokens.push_back(static_cast<int32_t>(quantize(point, cb)));
      }
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace tokendiff
