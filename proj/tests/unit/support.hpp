#pragma once

#include <numeric>
#include <vector>

#include "nnmd/engine.hpp"

namespace nnmd::testing {

inline ModelParams tiny_model(int ntypes, std::uint64_t seed, const std::vector<int>& sel,
                              std::vector<int> fit = {16, 16, 16}) {
  ModelDims dims;
  dims.ntypes = ntypes;
  dims.fit = std::move(fit);
  const double n_pad = std::accumulate(sel.begin(), sel.end(), 0.0);
  return init_params(seed, dims, n_pad * n_pad / 4.0);
}

inline CutoffSpec cutoff(double rc, double skin, int rebuild_every = 5) {
  CutoffSpec c;
  c.rc = rc;
  c.rcs = 0.5;
  c.skin = skin;
  c.rebuild_every = rebuild_every;
  return c;
}

inline RunConfig run_config(int ntypes, Scheme scheme) {
  RunConfig rc;
  rc.masses.assign(ntypes, 39.948);
  rc.scheme = scheme;
  return rc;
}

}  // namespace nnmd::testing
