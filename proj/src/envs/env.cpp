#include "strange/envs/env.hpp"

#include "strange/errors.hpp"

namespace strange::envs {

void EnvSpec::validate() const {
  if (n_agents < 1 || obs_dim < 1 || state_dim < 1 || n_actions < 1 || max_steps < 1) {
    throw ValidationError("EnvSpec fields must all be >= 1");
  }
}

}  // namespace strange::envs
