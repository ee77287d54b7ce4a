#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mixcast {

// A stateless predictor: flattened context window (n*d coordinates) to a
// prediction in [0,1]^n. Used for witness families and exact expectations.
using Predictor = std::function<std::vector<double>(std::span<const double>)>;

}  // namespace mixcast
