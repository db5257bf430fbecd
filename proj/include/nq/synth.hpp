#pragma once

#include <cstdint>

#include "nq/graph.hpp"

namespace nq {

// Stochastic block model with community-indicator attributes.
//
// Nodes are split into balanced communities (ids shuffled). Edges appear
// with probability p_in inside a community and p_out across. The attribute
// space is cut into one block per community; a node switches on each
// dimension of its own block with probability attr_on and every other
// dimension with probability attr_noise. Labels are the community ids.
struct SbmSpec {
  std::size_t nodes = 1000;
  std::size_t communities = 5;
  double p_in = 0.1;
  double p_out = 0.005;
  std::size_t attr_dim = 300;
  double attr_on = 0.1;
  double attr_noise = 0.01;
  std::uint64_t seed = 1;
};

Graph make_sbm(const SbmSpec& spec);

}  // namespace nq
