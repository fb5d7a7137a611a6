#include "mq/quench.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mq {

namespace {

void require_normalized(const StateVector& psi) {
  const double n = psi.norm();
  if (std::abs(n - 1.0) > kNormalizationSlack) {
    std::ostringstream msg;
    msg << "measurement on an unnormalized state (norm " << n << ")";
    throw ConfigError(msg.str());
  }
}

}  // namespace

OutcomeProbabilities outcome_probability(const StateVector& psi, const MeasurementSpec& spec) {
  require_normalized(psi);
  check_site(spec.site, psi.n_sites());
  const double up = std::clamp((1.0 + expectation(spec.axis, spec.site, psi)) / 2.0, 0.0, 1.0);
  return {up, 1.0 - up};
}

Outcome select_outcome(const OutcomeProbabilities& probabilities, const MeasurementSpec& spec) {
  switch (spec.policy) {
    case OutcomePolicy::forced_up: return Outcome::up;
    case OutcomePolicy::forced_down: return Outcome::down;
    case OutcomePolicy::sampled: break;
  }
  std::mt19937_64 rng(spec.seed);
  const double u = double(rng() >> 11) * 0x1.0p-53;
  return u < probabilities.up ? Outcome::up : Outcome::down;
}

CollapseResult collapse(const StateVector& psi_in, const MeasurementSpec& spec, BasisPtr target) {
  const StateVector psi = target ? psi_in.embedded_in(std::move(target)) : psi_in;
  const auto probs = outcome_probability(psi, spec);

  const Outcome outcome = select_outcome(probs, spec);
  const double p = outcome == Outcome::up ? probs.up : probs.down;
  if (p <= kCollapseProbabilityFloor) {
    std::ostringstream msg;
    msg << "collapse onto outcome " << (outcome == Outcome::up ? "up" : "down") << " at site " << spec.site
        << " has vanishing probability " << p;
    throw NumericalError(msg.str());
  }

  // Pi^{up/down} = (1 +/- sigma)/2
  const StateVector flipped = apply_pauli(spec.axis, spec.site, psi);
  const double sign = outcome == Outcome::up ? 1.0 : -1.0;
  StateVector out(psi.basis());
  for (std::size_t i = 0; i < psi.dim(); ++i) out[i] = 0.5 * (psi[i] + sign * flipped[i]);
  out.normalize();
  return {p, std::move(out), outcome};
}

BasisPtr post_measurement_sector(const MeasurementSpec& spec, const SectorBasis& ground_sector) {
  const int n = ground_sector.n_sites();
  check_site(spec.site, n);
  if (ground_sector.is_full()) return SectorBasis::full(n);
  std::set<int> ks;
  for (int k : ground_sector.popcounts()) {
    ks.insert(k);
    if (spec.axis != Axis::z) {
      if (k > 0) ks.insert(k - 1);
      if (k < n) ks.insert(k + 1);
    }
  }
  return build_sector_basis(n, ks);
}

}  // namespace mq
