#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

struct BandSpec {
    double lo_hz = 0.8;
    double hi_hz = 40.0;
};

namespace detail {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

/// Arbitrary-length DFT via Bluestein's chirp-z reduction to a power-of-two
/// convolution. Transform length equals the signal length, no padding of the
/// spectrum itself.
inline std::vector<cplx> dft(const std::vector<cplx>& in, bool inverse) {
    const std::size_t n = in.size();
    if ((n & (n - 1)) == 0) {
        std::vector<cplx> a = in;
        fft_pow2(a, inverse);
        return a;
    }
    // chirp: w_j = exp(-i*pi*j^2/n) forward, conjugate for inverse
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cplx> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        // j^2 mod 2n keeps the angle argument small for large n
        const std::size_t j2 = (j * j) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(j2) / static_cast<double>(n);
        chirp[j] = cplx(std::cos(ang), std::sin(ang));
    }
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
    for (std::size_t j = 0; j < n; ++j) a[j] = in[j] * chirp[j];
    for (std::size_t j = 0; j < n; ++j) {
        b[j] = std::conj(chirp[j]);
        if (j != 0) b[m - j] = std::conj(chirp[j]);
    }
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t j = 0; j < m; ++j) a[j] *= b[j];
    fft_pow2(a, true);
    std::vector<cplx> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = a[j] * chirp[j];
    if (inverse)
        for (auto& x : out) x /= static_cast<double>(n);
    return out;
}

}  // namespace detail

/// Brick-wall frequency-domain bandpass: every bin whose center frequency lies
/// strictly outside [lo_hz, hi_hz] is zeroed (edge bins are kept), then the
/// signal is reconstructed by the inverse transform. Conjugate-symmetric bins
/// share one |frequency| so they are zeroed in pairs and the output is real.
inline std::vector<double> fft_bandpass(const std::vector<double>& signal, int fs,
                                        const BandSpec& band) {
    if (signal.size() < 2) throw EmptySignal("bandpass needs >= 2 samples");
    if (band.hi_hz >= fs / 2.0)
        throw NyquistViolation("hi " + std::to_string(band.hi_hz) + " Hz >= fs/2");
    if (!(band.lo_hz >= 0.0) || !(band.hi_hz > band.lo_hz))
        throw ConfigError("invalid band");
    for (double x : signal)
        if (!std::isfinite(x)) throw MalformedRecord("non-finite sample in bandpass input");

    const std::size_t n = signal.size();
    std::vector<detail::cplx> spec(signal.begin(), signal.end());
    spec = detail::dft(spec, false);
    for (std::size_t j = 0; j < n; ++j) {
        const double idx = (j <= n / 2) ? static_cast<double>(j)
                                        : static_cast<double>(j) - static_cast<double>(n);
        const double freq = std::abs(idx) * fs / static_cast<double>(n);
        if (freq < band.lo_hz || freq > band.hi_hz) spec[j] = detail::cplx(0, 0);
    }
    spec = detail::dft(spec, true);
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = spec[j].real();
    return out;
}

/// Min-max normalization to [0, 1].
inline std::vector<double> normalize(const std::vector<double>& signal) {
    if (signal.size() < 2) throw EmptySignal("normalize needs >= 2 samples");
    const auto [lo, hi] = std::minmax_element(signal.begin(), signal.end());
    if (*hi == *lo) throw DegenerateSignal("constant signal");
    std::vector<double> out(signal.size());
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < signal.size(); ++i) out[i] = (signal[i] - *lo) / span;
    return out;
}

/// Linear-interpolation resampling to `target_len` points at uniformly spaced
/// fractional indices; endpoints map exactly.
inline std::vector<double> resample_linear(const std::vector<double>& segment,
                                           std::size_t target_len) {
    const std::size_t n = segment.size();
    if (n < 2 || target_len < 2) throw BadLength("resample needs n >= 2 and target >= 2");
    std::vector<double> out(target_len);
    const double step = static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
    for (std::size_t i = 0; i < target_len; ++i) {
        const double pos = static_cast<double>(i) * step;
        const std::size_t k = std::min(static_cast<std::size_t>(pos), n - 2);
        const double frac = pos - static_cast<double>(k);
        out[i] = segment[k] + frac * (segment[k + 1] - segment[k]);
    }
    out[0] = segment.front();
    out[target_len - 1] = segment.back();
    return out;
}

}  // namespace pulsegrid
