#pragma once

#include <cstdint>
#include <vector>

#include "poolattn/network.hpp"

namespace poolattn::detail {

// Plain-loop forward of the mini network in long double, used as the
// finite-difference oracle for the network check. Shares no code with
// the library forward.
long double wide_network_loss(const TwoBranchNet& model, const Tensor& image, const Tensor& r);

// Which smooth piece the network is on: the sign of every relu input and
// the first argmax of every CPA similarity column. Two states with equal
// patterns are joined by a path free of kinks.
std::vector<std::uint32_t> kink_pattern(const TwoBranchNet& model, const Tensor& image);

}  // namespace poolattn::detail
