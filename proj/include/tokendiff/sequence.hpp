#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tokendiff/errors.hpp"

namespace tokendiff {

/// Absorbing mask token. Regular tokens are 0..K-1.
inline constexpr int32_t kMaskToken = -1;

/// Unconditional (null) condition id. Action conditions are 1..V.
inline constexpr int32_t kNullCondition = 0;

/// Discrete token states with segment boundaries and per-position conditions.
struct TokenSequence {
  std::vector<int32_t> tokens;      // 0..K-1 or kMaskToken
  std::vector<int64_t> boundaries;  // cumulative segment ends; back() == tokens.size()
  std::vector<int32_t> conditions;  // one condition id per position

  int64_t size() const { return static_cast<int64_t>(tokens.size()); }
  int64_t segment_count() const { return static_cast<int64_t>(boundaries.size()); }

  bool contains_mask() const {
    for (int32_t tok : tokens)
      if (tok == kMaskToken) return true;
    return false;
  }

  int64_t segment_begin(int64_t seg) const { return seg == 0 ? 0 : boundaries[seg - 1]; }
  int64_t segment_end(int64_t seg) const { return boundaries[seg]; }

  /// Segment-relative offset of a position.
  int64_t offset_of(int64_t pos) const {
    int64_t begin = 0;
    for (int64_t b : boundaries) {
      if (pos < b) return pos - begin;
      begin = b;
    }
    return pos - begin;
  }

  static TokenSequence single(std::vector<int32_t> tokens, int32_t condition) {
    TokenSequence seq;
    seq.boundaries = {static_cast<int64_t>(tokens.size())};
    seq.conditions.assign(tokens.size(), condition);
    seq.tokens = std::move(tokens);
    return seq;
  }

  /// Checks the partition and constant-condition-per-segment invariants.
  void validate() const {
    if (boundaries.empty()) throw ParameterError("token sequence has no segments");
    int64_t prev = 0;
    for (int64_t b : boundaries) {
      if (b <= prev) throw ParameterError("segment boundaries must be strictly increasing");
      prev = b;
    }
    if (prev != size()) throw ParameterError("segment boundaries do not partition the sequence");
    if (static_cast<int64_t>(conditions.size()) != size())
      throw ParameterError("condition count does not match sequence length");
    for (int64_t seg = 0; seg < segment_count(); ++seg) {
      const int32_t cond = conditions[segment_begin(seg)];
      for (int64_t p = segment_begin(seg); p < segment_end(seg); ++p)
        if (conditions[p] != cond)
          throw ParameterError("conditions vary within segment " + std::to_string(seg));
    }
  }
};

struct PlanSegment {
  int32_t condition = kNullCondition;
  int64_t length = 0;
};

/// Multi-segment generation request: segments, the step where per-segment
/// independent denoising starts, guidance scale, and the root seed.
struct GenerationPlan {
  std::vector<PlanSegment> segments;
  int t_independent = 90;  // joint denoising runs for steps T..t_independent+1
  double guidance = 2.0;
  uint64_t seed = 0;

  void validate(int t_steps) const {
    if (segments.empty()) throw ParameterError("generation plan needs at least one segment");
    for (const PlanSegment& seg : segments)
      if (seg.length < 1) throw ParameterError("segment lengths must be >= 1");
    if (t_independent < 0 || t_independent > t_steps)
      throw ParameterError("t_independent must lie in [0, T]");
    if (guidance < 0.0) throw ParameterError("guidance scale must be >= 0");
  }
};

/// Digest of the plan's shape (segments, phase split, guidance); excludes
/// the seed, which is recorded separately in output records.
uint64_t plan_digest(const GenerationPlan& plan);

}  // namespace tokendiff
