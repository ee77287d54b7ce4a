#pragma once

#include <vector>

#include "mixcast/matrix.hpp"
#include "mixcast/process.hpp"

namespace mixcast::testutil {

inline Matrix kernel2(double p00, double p01, double p10, double p11) {
    Matrix k(2, 2);
    k(0, 0) = p00;
    k(0, 1) = p01;
    k(1, 0) = p10;
    k(1, 1) = p11;
    return k;
}

inline std::vector<std::vector<double>> embed01() { return {{0.0}, {1.0}}; }

// Symmetric 2-state chain that stays with probability 0.9.
inline MarkovProcess stay09() {
    return MarkovProcess::build(kernel2(0.9, 0.1, 0.1, 0.9), embed01(), 1);
}

// Embedded Bernoulli(1/2): both rows uniform.
inline MarkovProcess iid05() {
    return MarkovProcess::build(kernel2(0.5, 0.5, 0.5, 0.5), embed01(), 1);
}

// Deterministic alternation 0 -> 1 -> 0; periodic, so ergodicity is not required.
inline MarkovProcess cycle2() {
    MarkovOptions opt;
    opt.require_ergodic = false;
    return MarkovProcess::build(kernel2(0.0, 1.0, 1.0, 0.0), embed01(), 1, opt);
}

}  // namespace mixcast::testutil
