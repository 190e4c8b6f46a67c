#pragma once

#include <cstdint>

#include "scop/gradcheck.hpp"
#include "scop/model.hpp"

namespace scop {

/// The small configuration used for finite-difference checking:
/// d=8, one layer, one head, cap 4, no dropout.
ModelConfig gradcheck_config();

/// Checks every parameter of a freshly initialized small SCoP model. The loss
/// sums the pretraining and fine-tuning cross-entropies over a few labeled
/// triples of a generated graph, so both heads receive gradient. Runs in
/// double precision at a well-conditioned point: embeddings N(0,1), matrices
/// scaled by 0.5/sqrt(fan_in), ReLU biases at 3 so no unit sits on its kink.
GradCheckReport scop_gradcheck(std::uint64_t seed, double tolerance = 1e-3, GradCheckOptions options = {});

}  // namespace scop
