#include "ddtime/spectral.hpp"

#include <cmath>
#include <numbers>

#include "ddtime/error.hpp"

namespace ddtime {
namespace {

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

// Twiddle angles reduce k*n mod T first so large products keep full precision.
double twiddle_angle(std::size_t k, std::size_t n, std::size_t len) {
  return -2.0 * std::numbers::pi * static_cast<double>((k * n) % len) / static_cast<double>(len);
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, twiddle_angle(k, 1, len));
        const auto u = a[i + k];
        const auto t = w * a[i + k + len / 2];
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
      }
    }
  }
}

void check_equal_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "sequences differ in length");
}

}  // namespace

Spectrum dft_direct(std::span<const double> x) {
  const std::size_t len = x.size();
  Spectrum out(len);
  for (std::size_t k = 0; k < len; ++k) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double ang = twiddle_angle(k, n, len);
      re += x[n] * std::cos(ang);
      im += x[n] * std::sin(ang);
    }
    out[k] = {re, im};
  }
  return out;
}

Spectrum dft(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::invalid_argument, "dft of an empty sequence");
  if (!is_power_of_two(x.size())) return dft_direct(x);
  Spectrum a(x.begin(), x.end());
  fft_radix2(a);
  return a;
}

double spectral_l1(std::span<const double> a, std::span<const double> b) {
  check_equal_length(a, b);
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  double sum = 0.0;
  for (const auto& c : dft(diff)) sum += std::abs(c);
  return sum;
}

std::vector<double> spectral_l1_grad(std::span<const double> a, std::span<const double> b) {
  check_equal_length(a, b);
  const std::size_t len = a.size();
  std::vector<double> diff(len);
  for (std::size_t i = 0; i < len; ++i) diff[i] = a[i] - b[i];
  const auto spec = dft(diff);
  // d|X_k|/dx_n = Re(conj(X_k) e^{-2 pi i k n / T}) / |X_k|
  std::vector<double> grad(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    const double mod = std::abs(spec[k]);
    if (mod == 0.0) continue;
    const double re = spec[k].real() / mod;
    const double im = spec[k].imag() / mod;
    for (std::size_t n = 0; n < len; ++n) {
      const double ang = twiddle_angle(k, n, len);
      grad[n] += re * std::cos(ang) + im * std::sin(ang);
    }
  }
  return grad;
}

std::vector<double> power_spectrum(std::span<const double> x) {
  const auto spec = dft(x);
  std::vector<double> out(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) out[k] = std::norm(spec[k]) / static_cast<double>(x.size());
  return out;
}

}  // namespace ddtime
