#pragma once

#include <map>
#include <tuple>

#include "bdgkit/groundstate.hpp"

namespace bdgkit::testing {

// Ground state for the standard parameter sets on [-16, 16)^d ([-8, 8)^3 in
// 3D), memoized per process since several checks share the same few grids.
inline const GroundState& ground(Mode mode, int dim, int n, std::vector<double> gamma = {}) {
  static std::map<std::tuple<Mode, int, int, std::vector<double>>, GroundState> cache;
  if (gamma.empty()) gamma.assign(static_cast<std::size_t>(dim), 1.0);
  const auto key = std::make_tuple(mode, dim, n, gamma);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto params = mode == Mode::jj ? PhysParams::josephson(dim) : PhysParams::no_josephson(dim);
    params.gamma = gamma;
    const auto grid = make_grid(dim, dim == 3 ? 8.0 : 16.0, n);
    it = cache.emplace(key, minimize_ground_state(grid, params, mode)).first;
  }
  return it->second;
}

}  // namespace bdgkit::testing
