#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pulsegrid/ampd.hpp"
#include "pulsegrid/dsp.hpp"
#include "pulsegrid/errors.hpp"
#include "pulsegrid/signalio.hpp"

namespace pulsegrid {

inline constexpr std::size_t kDefaultBeatLength = 625;
inline constexpr double kMinRrSeconds = 0.4;  // HR 143 bpm admission bound
inline constexpr double kMaxRrSeconds = 1.2;  // HR 50 bpm admission bound

/// Whole-based feature: one inter-R-peak beat resampled to a fixed length.
struct BeatVector {
    std::vector<double> values;  // length L, in [0,1] after preprocessing
    std::string subject_id;
    BpLabels labels;  // inherited from the parent 15 s segment
    double rr_s = 0.0;
};

/// Extract one BeatVector per consecutive peak pair whose RR duration lies in
/// [0.4 s, 1.2 s]; out-of-range pairs are skipped. The segment must already be
/// preprocessed (bandpassed + normalized) and the peaks detected on the same
/// samples.
inline std::vector<BeatVector> extract_beats(const SegmentRecord& segment, const PeakSet& peaks,
                                             std::size_t L = kDefaultBeatLength) {
    std::vector<BeatVector> out;
    for (std::size_t i = 0; i + 1 < peaks.indices.size(); ++i) {
        const std::size_t a = peaks.indices[i];
        const std::size_t b = peaks.indices[i + 1];
        const double rr = static_cast<double>(b - a) / segment.fs;
        if (rr < kMinRrSeconds || rr > kMaxRrSeconds) continue;
        BeatVector bv;
        bv.subject_id = segment.subject_id;
        bv.labels = segment.labels;
        bv.rr_s = rr;
        const std::vector<double> raw(segment.ecg_window.begin() + a,
                                      segment.ecg_window.begin() + b);
        bv.values = resample_linear(raw, L);
        out.push_back(std::move(bv));
    }
    if (out.empty()) throw NoValidBeats("no peak pair with RR in [0.4, 1.2] s");
    return out;
}

/// Row-major feature matrix with parallel label vectors and a subject index
/// for fold construction.
struct FeatureDataset {
    std::size_t cols = 0;
    std::vector<std::vector<double>> rows;
    std::vector<double> dbp, map, sbp;
    std::vector<std::string> subject;  // one entry per row

    std::size_t size() const { return rows.size(); }
};

struct SegmentPipelineOptions {
    BandSpec band;
    std::size_t beat_length = kDefaultBeatLength;
    AmpdOptions ampd;
};

/// Preprocess one raw segment's ECG in place: brick-wall bandpass then min-max
/// normalization per 15 s window.
inline void preprocess_segment(SegmentRecord& seg, const BandSpec& band) {
    seg.ecg_window = normalize(fft_bandpass(seg.ecg_window, seg.fs, band));
}

/// Deterministic assembly: segment order, then beat order within each segment.
/// Segments yielding no valid beat are skipped.
inline FeatureDataset assemble_dataset(const std::vector<SegmentRecord>& segments,
                                       std::size_t L = kDefaultBeatLength,
                                       const AmpdOptions& ampd = {}) {
    FeatureDataset ds;
    ds.cols = L;
    for (const auto& seg : segments) {
        AmpdOptions opt = ampd;
        // Admissible beats span at most 1.2 s, so the detection scale never
        // needs to exceed half of that; larger scales only admit harmonic
        // aliases of the true beat period.
        if (opt.max_scale == 0)
            opt.max_scale = static_cast<std::size_t>(std::ceil(0.6 * seg.fs));
        const PeakSet peaks = detect_peaks(seg.ecg_window, opt);
        std::vector<BeatVector> beats;
        try {
            beats = extract_beats(seg, peaks, L);
        } catch (const NoValidBeats&) {
            continue;
        }
        for (auto& b : beats) {
            ds.rows.push_back(std::move(b.values));
            ds.dbp.push_back(b.labels.dbp);
            ds.map.push_back(b.labels.map);
            ds.sbp.push_back(b.labels.sbp);
            ds.subject.push_back(b.subject_id);
        }
    }
    if (ds.rows.empty()) throw EmptyDataset("no segment produced a valid beat");
    return ds;
}

}  // namespace pulsegrid
