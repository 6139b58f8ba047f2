#pragma once

// Numerical tolerances used across the library and its test suites.
// Values are chosen for IEEE double precision with inner-product lengths
// up to B = 128; they are intentionally kept in one place.

namespace ocd::tol {

// OCD and the naive coordinate-descent reference are algebraically
// identical; they may differ only by floating-point associativity.
inline constexpr double kOcdCdEquivalenceRel = 1e-9;

// Maintained residual vs. y - Hz recomputed from scratch.
inline constexpr double kResidualIdentityRel = 1e-9;

// Iterative estimate vs. closed-form MMSE solution at large iteration count.
inline constexpr double kConvergenceRel = 1e-6;

// Box-constrained first-order optimality residual per real coordinate.
inline constexpr double kKktResidual = 1e-6;

// Rounding slack (relative to objective magnitude) allowed when asserting
// monotone descent of the coordinate-descent objective.
inline constexpr double kDescentSlackRel = 1e-12;

// Preprocessing identity d_inv * (norm + alpha) == 1.
inline constexpr double kPreprocessIdentity = 1e-10;

// Post-equalization SINR rho = mu / (1 - mu): clamp threshold and value
// applied when the approximate gain reaches 1.
inline constexpr double kGainClampThreshold = 1e-9;
inline constexpr double kSinrClampValue = 1e9;

}  // namespace ocd::tol
