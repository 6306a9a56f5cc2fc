#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ddtime {

using Spectrum = std::vector<std::complex<double>>;

/// Unnormalized forward DFT, X_k = sum_n x_n exp(-2 pi i k n / T).
/// Direct O(T^2) evaluation; power-of-two lengths take a radix-2 path.
Spectrum dft(std::span<const double> x);

/// Always the direct sum. Reference for the fast path.
Spectrum dft_direct(std::span<const double> x);

/// Sum over bins of |dft(a)_k - dft(b)_k|.
double spectral_l1(std::span<const double> a, std::span<const double> b);

/// Gradient of spectral_l1 with respect to `a` (the gradient for `b` is its
/// negation). Bins with zero modulus contribute the zero subgradient.
std::vector<double> spectral_l1_grad(std::span<const double> a, std::span<const double> b);

/// |X_k|^2 / T per bin.
std::vector<double> power_spectrum(std::span<const double> x);

}  // namespace ddtime
