#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pulsegrid/errors.hpp"
#include "pulsegrid/rng.hpp"

namespace pulsegrid {

struct PeakSet {
    std::vector<std::size_t> indices;  // strictly increasing, interior samples only
    std::size_t scale_lambda = 0;      // selected LMS scale
};

struct AmpdOptions {
    bool deterministic = true;   // r = 0.5 everywhere instead of uniform draws
    std::uint64_t seed = 0;      // used only when deterministic == false
    std::size_t max_scale = 0;   // 0 = full ceil(N/2)-1; pipelines cap at ~0.6*fs
};

/// Automatic multiscale-based peak detection.
///
/// Pipeline: least-squares linear detrend; local-maxima scalogram M (scales
/// k = 1..L, L = ceil(N/2)-1, optionally capped) with M[k][i] = 0 when sample
/// i is a strict maximum over both neighbors at distance k and lies in the
/// interior [k, N-1-k], else 1 + r; gamma_k = row sums; lambda = argmin gamma
/// (smallest k on ties); peaks are the columns that are all-zero over rows
/// 1..lambda.
inline PeakSet detect_peaks(const std::vector<double>& signal, const AmpdOptions& opt = {}) {
    const std::size_t n = signal.size();
    if (n < 8) throw SignalTooShort("AMPD needs >= 8 samples, got " + std::to_string(n));
    for (double x : signal)
        if (!std::isfinite(x)) throw MalformedRecord("non-finite sample in AMPD input");

    // linear detrend
    std::vector<double> x(n);
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i);
            sx += t;
            sy += signal[i];
            sxx += t * t;
            sxy += t * signal[i];
        }
        const double nn = static_cast<double>(n);
        const double denom = nn * sxx - sx * sx;
        const double slope = denom != 0.0 ? (nn * sxy - sx * sy) / denom : 0.0;
        const double intercept = (sy - slope * sx) / nn;
        for (std::size_t i = 0; i < n; ++i)
            x[i] = signal[i] - (slope * static_cast<double>(i) + intercept);
    }

    std::size_t scales = (n + 1) / 2 - 1;  // ceil(n/2) - 1
    if (opt.max_scale > 0 && opt.max_scale < scales) scales = opt.max_scale;
    if (scales == 0) return {{}, 0};

    Rng rng(opt.seed);
    // is_max[k-1][i]: strict maximum at scale k
    std::vector<std::vector<std::uint8_t>> is_max(scales, std::vector<std::uint8_t>(n, 0));
    std::vector<double> gamma(scales, 0.0);
    for (std::size_t k = 1; k <= scales; ++k) {
        auto& row = is_max[k - 1];
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool interior = i >= k && i + k < n;
            if (interior && x[i] > x[i - k] && x[i] > x[i + k]) {
                row[i] = 1;
            } else {
                sum += 1.0 + (opt.deterministic ? 0.5 : rng.uniform());
            }
        }
        gamma[k - 1] = sum;
    }

    std::size_t lambda = 1;
    double best = gamma[0];
    for (std::size_t k = 2; k <= scales; ++k) {
        if (gamma[k - 1] < best) {
            best = gamma[k - 1];
            lambda = k;
        }
    }

    PeakSet out;
    out.scale_lambda = lambda;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        bool peak = true;
        for (std::size_t k = 1; k <= lambda && peak; ++k) peak = is_max[k - 1][i];
        if (peak) out.indices.push_back(i);
    }
    return out;
}

struct RrInterval {
    double duration_s = 0.0;
    std::size_t start_idx = 0;
    std::size_t end_idx = 0;
};

inline std::vector<RrInterval> rr_intervals(const PeakSet& peaks, int fs) {
    if (peaks.indices.size() < 2) throw TooFewPeaks("need >= 2 peaks for RR intervals");
    std::vector<RrInterval> out;
    out.reserve(peaks.indices.size() - 1);
    for (std::size_t i = 1; i < peaks.indices.size(); ++i) {
        const std::size_t a = peaks.indices[i - 1];
        const std::size_t b = peaks.indices[i];
        out.push_back({static_cast<double>(b - a) / fs, a, b});
    }
    return out;
}

}  // namespace pulsegrid
