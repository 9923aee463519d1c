#pragma once

#include <string>

#include "basiscluster/elbo.hpp"
#include "basiscluster/model.hpp"
#include "basiscluster/nn.hpp"

namespace basiscluster {

// Self-describing single-file checkpoint: magic + version, a JSON header
// (model config, scheme, prior, rng state, array directory), then the raw
// parameter payload as 64-bit little-endian floats in directory order.
struct Checkpoint {
  ModelConfig model;
  InferenceScheme scheme = InferenceScheme::collapsed;
  PriorConfig prior;
  std::string rng_state;
  ParamStore params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace basiscluster
