#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "otmorph/errors.hpp"

namespace otmorph {

// Complex FFT of arbitrary length: iterative radix-2 for powers of two,
// Bluestein's chirp-z construction otherwise. Twiddle tables are built once
// per instance, so reuse one Fft object per transform size.
class Fft {
public:
  using cd = std::complex<double>;

  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw InputError("fft: size must be positive");
    if (is_pow2(n)) {
      init_radix2(n);
    } else {
      init_bluestein(n);
    }
  }

  std::size_t size() const { return n_; }

  // In-place DFT, a[k] = sum_t a[t] exp(-2*pi*i*k*t/n). No scaling.
  void forward(cd* a) const {
    if (conv_size_ == 0) {
      radix2(a, n_);
    } else {
      bluestein(a);
    }
  }

  // In-place inverse DFT with 1/n scaling.
  void inverse(cd* a) const {
    for (std::size_t t = 0; t < n_; ++t) a[t] = std::conj(a[t]);
    forward(a);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t t = 0; t < n_; ++t) a[t] = std::conj(a[t]) * scale;
  }

  void forward(std::vector<cd>& a) const {
    check_len(a.size());
    forward(a.data());
  }
  void inverse(std::vector<cd>& a) const {
    check_len(a.size());
    inverse(a.data());
  }

private:
  static bool is_pow2(std::size_t n) { return (n & (n - 1)) == 0; }

  void check_len(std::size_t len) const {
    if (len != n_) throw InputError("fft: buffer length does not match transform size");
  }

  void init_radix2(std::size_t n) {
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = cd(std::cos(ang), std::sin(ang));
    }
  }

  void init_bluestein(std::size_t n) {
    conv_size_ = 1;
    while (conv_size_ < 2 * n - 1) conv_size_ <<= 1;
    init_radix2(conv_size_);

    // chirp[k] = exp(-pi*i*k^2/n); reduce k^2 mod 2n to keep the angle small.
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t k2 = (k * k) % (2 * n);
      double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      chirp_[k] = cd(std::cos(ang), std::sin(ang));
    }
    // Spectrum of the conjugate chirp, padded circularly.
    chirp_spec_.assign(conv_size_, cd(0.0, 0.0));
    chirp_spec_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      chirp_spec_[k] = std::conj(chirp_[k]);
      chirp_spec_[conv_size_ - k] = std::conj(chirp_[k]);
    }
    radix2(chirp_spec_.data(), conv_size_);
  }

  void radix2(cd* a, std::size_t n) const {
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    const std::size_t tw_stride_base = twiddles_.size() * 2;  // == table's n
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = tw_stride_base / len;
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          cd u = a[i + k];
          cd v = a[i + k + half] * twiddles_[k * stride];
          a[i + k] = u + v;
          a[i + k + half] = u - v;
        }
      }
    }
  }

  void bluestein(cd* a) const {
    std::vector<cd> buf(conv_size_, cd(0.0, 0.0));
    for (std::size_t k = 0; k < n_; ++k) buf[k] = a[k] * chirp_[k];
    radix2(buf.data(), conv_size_);
    for (std::size_t k = 0; k < conv_size_; ++k) buf[k] *= chirp_spec_[k];
    // inverse transform of the padded buffer
    for (std::size_t k = 0; k < conv_size_; ++k) buf[k] = std::conj(buf[k]);
    radix2(buf.data(), conv_size_);
    const double scale = 1.0 / static_cast<double>(conv_size_);
    for (std::size_t k = 0; k < n_; ++k) a[k] = std::conj(buf[k]) * scale * chirp_[k];
  }

  std::size_t n_;
  std::size_t conv_size_ = 0;  // 0 when the radix-2 path applies directly
  std::vector<cd> twiddles_;
  std::vector<cd> chirp_;
  std::vector<cd> chirp_spec_;
};

}  // namespace otmorph
