// Adjacent-state sequence augmentation: each augmented element concatenates a
// state with its successor, so consecutive elements share half their scalars.
// The same map builds the shared ("shifted and concatenated") noise whose
// overlap correlates adjacent generated states.
#pragma once

#include <cstdint>
#include <vector>

#include "scenediff/common.hpp"

namespace scenediff {

// x: N x T x H  ->  N x (T-1) x 2H, element t = concat(x[t], x[t+1]).
std::vector<real> augment(const std::vector<real>& x, int64_t N, int64_t T, int64_t H);

// Identical map applied to an i.i.d. noise draw; kept as a named entry point
// because the caller-side contract (standard-normal input) differs.
std::vector<real> augment_noise(const std::vector<real>& eps0, int64_t N, int64_t T, int64_t H);

// S: N x Tm x 2H  ->  N x (Tm+1) x H. Front of the first element and rear of
// the last pass through; interior states average the two copies, which is an
// exact inverse of augment() whenever the overlap identity holds.
std::vector<real> de_augment(const std::vector<real>& S, int64_t N, int64_t Tm, int64_t H2);

// rear half - front half per element; last extent must be even.
std::vector<real> half_difference(const std::vector<real>& S, int64_t rows, int64_t H2);

// True when rear_half(element t) == front_half(element t+1) for every agent
// and interior boundary, to within tol (tol = 0 demands bit equality).
bool overlap_consistent(const std::vector<real>& S, int64_t N, int64_t Tm, int64_t H2, real tol);

}  // namespace scenediff
