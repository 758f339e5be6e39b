#pragma once

namespace cevkmv {

/// Standard normal density.
double normal_pdf(double x) noexcept;

/// Standard normal CDF. Uses the complementary error function so both tails
/// keep full relative precision (N(-10) ~ 7.6e-24 is representable).
double normal_cdf(double x) noexcept;

/// Inverse of normal_cdf. Acklam's rational approximation refined by one
/// Halley step; relative error near machine precision on (0, 1).
/// Returns -inf at 0, +inf at 1 and NaN outside [0, 1].
double normal_quantile(double p) noexcept;

}  // namespace cevkmv
