#pragma once

// Single-site projective measurement: outcome probabilities and collapse.

#include "mq/statespace.hpp"

namespace mq {

enum class Outcome { up, down };
enum class OutcomePolicy { forced_up, forced_down, sampled };

struct MeasurementSpec {
  int site = 1;
  Axis axis = Axis::x;
  OutcomePolicy policy = OutcomePolicy::forced_up;
  std::uint64_t seed = 0;  // used by OutcomePolicy::sampled
};

struct OutcomeProbabilities {
  double up = 0.0;
  double down = 0.0;
};

struct CollapseResult {
  double probability = 0.0;  // of the selected outcome
  StateVector state;         // normalized post-measurement state
  Outcome outcome = Outcome::up;
};

inline constexpr double kCollapseProbabilityFloor = 1e-12;
inline constexpr double kNormalizationSlack = 1e-8;

/// p_up = (1 + <sigma>)/2, p_down = 1 - p_up.
OutcomeProbabilities outcome_probability(const StateVector& psi, const MeasurementSpec& spec);

/// Outcome chosen by the policy; sampled outcomes draw u in [0, 1) from mt19937_64(seed), up when u < p_up.
Outcome select_outcome(const OutcomeProbabilities& probabilities, const MeasurementSpec& spec);

/// Pi^mu psi / sqrt(p_mu). When `target` is given the state is first embedded
/// into it, which is required for sector bases that the measured axis leaves.
CollapseResult collapse(const StateVector& psi, const MeasurementSpec& spec, BasisPtr target = nullptr);

/// Basis reached by a measurement on a state supported on `ground_sector`:
/// x or y move popcount k to k-1 and k+1, z keeps it.
BasisPtr post_measurement_sector(const MeasurementSpec& spec, const SectorBasis& ground_sector);

}  // namespace mq
