#pragma once

#include <string>
#include <vector>

#include "nnmd/config.hpp"

namespace nnmd::tools {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle suites run by `nnmd validate`: ghost sets, scheme equivalence,
/// finite-difference gradients and descriptor invariances. Every suite is
/// evaluated in double precision with the configured model.
std::vector<SuiteResult> run_validation(const Config& cfg);

}  // namespace nnmd::tools
