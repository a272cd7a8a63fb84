#pragma once

#include <functional>
#include <vector>

#include "treepm/particles.hpp"

namespace tpm {

// Shared time step selection: either a fixed dt or the adaptive rule
// dt = eta * min_i sqrt(softening / |a_i|), capped at dt_max. With zero
// acceleration everywhere the adaptive rule falls back to dt_max.
struct DtPolicy {
  bool adaptive = false;
  double fixed_dt = 0.0;
  double eta = 0.1;
  double dt_max = 0.0;
  double softening = 0.0;
};

double choose_dt(const std::vector<Vec3>& accel, const DtPolicy& policy);

using ForceFn = std::function<std::vector<Vec3>(const ParticleSet&)>;

// One kick-drift-kick leapfrog step with a shared dt. If `accel` is non-null
// and sized, it is used as the opening accelerations and receives the
// closing ones (avoids one force pass per step when driven in a loop).
// Returns the dt taken. Positions are re-wrapped into the box.
double integrate_step(ParticleSet& state, const ForceFn& force,
                      const DtPolicy& policy,
                      std::vector<Vec3>* accel = nullptr);

}  // namespace tpm
