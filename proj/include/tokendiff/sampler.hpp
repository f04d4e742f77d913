#pragma once

#include <Eigen/Dense>

#include "tokendiff/denoiser.hpp"
#include "tokendiff/rng.hpp"
#include "tokendiff/schedule.hpp"
#include "tokendiff/sequence.hpp"

namespace tokendiff {

/// Classifier-free guidance on per-position log-probability rows:
/// (s + 1) * log p_cond - s * log p_uncond, renormalized row-wise via
/// log-sum-exp. s = 0 returns the conditional rows unchanged (bit-exact).
/// Zero probabilities are floored at the smallest normal magnitude before
/// extrapolation so the combination stays finite.
Eigen::MatrixXd guided_log_probs(const Eigen::MatrixXd& cond_log, const Eigen::MatrixXd& uncond_log,
                                 double s);

/// One reverse step z_t -> z_{t-1}. Each position queries the denoiser with
/// its condition (and, when s > 0, with the null condition for guidance),
/// mixes the exact posteriors over the predicted z0 distribution, and
/// samples independently. Positions are processed in order, one rng draw
/// each.
TokenSequence reverse_step(const TokenSequence& z_t, int t, const Denoiser& denoiser,
                           const TransitionModel& transitions, double s, RngStream& rng);

/// Full reverse chain for one segment: start from all-MASK at t = T and
/// denoise down to t = 1. The result contains no MASK.
TokenSequence generate_single(int32_t condition, int64_t length, const Denoiser& denoiser,
                              const TransitionModel& transitions, double s, RngStream& rng);

/// Two-phase multi-segment generation. Steps T..t_independent+1 denoise the
/// concatenated sequence jointly (cross-boundary neighbor context, per-
/// position conditions, rng substream 0). Steps t_independent..1 denoise
/// each segment in isolation on rng substream i (segments numbered from 1),
/// so t_independent = T reproduces per-segment generate_single runs
/// bit-exactly.
TokenSequence generate_multi(const GenerationPlan& plan, const Denoiser& denoiser,
                             const TransitionModel& transitions);

}  // namespace tokendiff
