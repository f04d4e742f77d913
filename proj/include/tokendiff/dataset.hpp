#pragma once

#include <cstdint>
#include <vector>

#include "tokendiff/codebook.hpp"
#include "tokendiff/training.hpp"

namespace tokendiff {

/// Synthetic training corpus: for every condition id 1..conditions, token
/// sequences obtained by quantizing smooth sinusoid trajectories whose
/// frequency and phase depend on the condition (plus per-sequence seeded
/// jitter). Amplitudes span the codebook's bounding box so quantization
/// visits a varied token set. Deterministic per seed.
std::vector<TrainingRecord> make_synthetic_dataset(const Codebook& cb, int conditions,
                                                   int sequences_per_condition,
                                                   int tokens_per_sequence, uint64_t seed);

}  // namespace tokendiff
