#pragma once

// Self-check suites behind `deltavar verify`. Each returns one Check per
// property; a suite passes when every required check does.

#include <cstdint>
#include <string_view>
#include <vector>

#include "deltavar/experiments.hpp"

namespace deltavar {

/// linalg, jacobian, category1, category2, nonlinear, plus the groups fast
/// (everything except nonlinear) and all.
std::vector<std::string_view> verify_suite_names();

std::vector<Check> run_verify_suite(std::string_view suite, std::uint64_t seed = 7);

}  // namespace deltavar
