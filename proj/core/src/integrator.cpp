#include "treepm/integrator.hpp"

#include <cmath>
#include <stdexcept>

namespace tpm {

double choose_dt(const std::vector<Vec3>& accel, const DtPolicy& policy) {
  if (!policy.adaptive) {
    if (!(policy.fixed_dt > 0.0))
      throw std::invalid_argument("DtPolicy: fixed_dt must be positive");
    return policy.fixed_dt;
  }
  if (!(policy.dt_max > 0.0))
    throw std::invalid_argument("DtPolicy: adaptive policy needs dt_max");
  double dt = policy.dt_max;
  for (const Vec3& a : accel) {
    const double mag = norm(a);
    if (mag > 0.0) dt = std::min(dt, policy.eta * std::sqrt(policy.softening / mag));
  }
  return dt;
}

double integrate_step(ParticleSet& state, const ForceFn& force,
                      const DtPolicy& policy, std::vector<Vec3>* accel) {
  std::vector<Vec3> local;
  std::vector<Vec3>* a = accel && accel->size() == state.size() ? accel : &local;
  if (a == &local) local = force(state);

  const double dt = choose_dt(*a, policy);
  const double half = 0.5 * dt;
  for (std::size_t i = 0; i < state.size(); ++i) {
    state.velocities[i] += half * (*a)[i];
    state.positions[i] =
        state.box.wrap(state.positions[i] + dt * state.velocities[i]);
  }
  std::vector<Vec3> a1 = force(state);
  for (std::size_t i = 0; i < state.size(); ++i)
    state.velocities[i] += half * a1[i];
  state.time += dt;
  if (accel) *accel = std::move(a1);
  return dt;
}

}  // namespace tpm
