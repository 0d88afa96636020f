#include "pulsegrid/features.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "pulsegrid/synth.hpp"

using namespace pulsegrid;

namespace {

/// Preprocessed-looking segment with peaks at exact 1 s spacing.
SegmentRecord make_segment(const std::string& id = "s0") {
    SegmentRecord seg;
    seg.subject_id = id;
    seg.fs = 125;
    seg.ecg_window.assign(1875, 0.1);
    for (std::size_t p = 0; p < 15; ++p) seg.ecg_window[p * 125 + 20] = 1.0;
    seg.abp_window.assign(1875, 80.0);
    seg.abp_window[7] = 120.0;
    seg.labels = derive_labels(seg.abp_window, 125);
    return seg;
}

PeakSet even_peaks() {
    PeakSet p;
    for (std::size_t k = 0; k < 15; ++k) p.indices.push_back(k * 125 + 20);
    return p;
}

}  // namespace

TEST_CASE("15 peaks at 1 s spacing give 14 beat vectors of length 625") {
    const SegmentRecord seg = make_segment();
    const auto beats = extract_beats(seg, even_peaks(), 625);
    REQUIRE(beats.size() == 14);
    for (const auto& b : beats) {
        CHECK(b.values.size() == 625);
        CHECK(b.rr_s == doctest::Approx(1.0));
        CHECK(b.subject_id == "s0");
        CHECK(b.labels.dbp == seg.labels.dbp);
        CHECK(b.labels.sbp == seg.labels.sbp);
    }
}

TEST_CASE("pairs outside the RR admission range are skipped") {
    const SegmentRecord seg = make_segment();
    PeakSet p;
    // 0.3 s apart (HR 200): below the admissible RR range
    for (std::size_t k = 0; k < 10; ++k) p.indices.push_back(k * 37 + 20);
    CHECK_THROWS_AS(extract_beats(seg, p, 625), NoValidBeats);

    // mix: one valid pair among invalid ones contributes exactly one vector
    PeakSet mixed;
    mixed.indices = {20, 57, 182, 1500};  // RR: 0.296, 1.0, 10.5 s
    const auto beats = extract_beats(seg, mixed, 625);
    CHECK(beats.size() == 1);
    CHECK(beats[0].rr_s == doctest::Approx(1.0));
}

TEST_CASE("resampled beat matches the closed-form linear map oracle") {
    SegmentRecord seg = make_segment();
    // plant a known template between two peaks
    for (std::size_t i = 20; i < 145; ++i)
        seg.ecg_window[i] = std::sin(static_cast<double>(i - 20) / 124.0 * 3.14159);
    PeakSet p;
    p.indices = {20, 145};
    const auto beats = extract_beats(seg, p, 625);
    REQUIRE(beats.size() == 1);
    const std::vector<double> raw(seg.ecg_window.begin() + 20, seg.ecg_window.begin() + 145);
    const auto expect = resample_linear(raw, 625);
    for (std::size_t i = 0; i < 625; ++i)
        CHECK(std::abs(beats[0].values[i] - expect[i]) < 1e-9);
}

TEST_CASE("assemble_dataset counts rows and carries labels through") {
    std::vector<SegmentRecord> segs;
    for (int i = 0; i < 3; ++i) segs.push_back(make_segment("sub" + std::to_string(i)));
    const FeatureDataset ds = assemble_dataset(segs, 625);
    CHECK(ds.cols == 625);
    CHECK(ds.size() == ds.dbp.size());
    CHECK(ds.size() == ds.subject.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.dbp[i] == segs[0].labels.dbp);
        CHECK(std::abs(ds.map[i] - (2 * ds.dbp[i] + ds.sbp[i]) / 3.0) < 1e-9);
    }
    // deterministic assembly
    const FeatureDataset ds2 = assemble_dataset(segs, 625);
    CHECK(ds.rows == ds2.rows);
    CHECK(ds.subject == ds2.subject);
}

TEST_CASE("end-to-end rows stay within [0,1] and match per-segment beat counts") {
    SynthConfig cfg;
    cfg.n_subjects = 4;
    cfg.segments_per_subject = 1;
    cfg.seed = 5;
    const SynthOutput synth = generate(cfg);
    std::vector<SegmentRecord> segs;
    for (const auto& rec : synth.records) {
        auto s = segment(rec, 1);
        segs.insert(segs.end(), s.begin(), s.end());
    }
    for (auto& s : segs) preprocess_segment(s, BandSpec{});

    std::size_t expected_rows = 0;
    for (const auto& s : segs) {
        AmpdOptions opt;
        opt.max_scale = static_cast<std::size_t>(std::ceil(0.6 * s.fs));
        try {
            expected_rows += extract_beats(s, detect_peaks(s.ecg_window, opt), 625).size();
        } catch (const NoValidBeats&) {
        }
    }
    const FeatureDataset ds = assemble_dataset(segs, 625);
    CHECK(ds.size() == expected_rows);
    for (const auto& row : ds.rows)
        for (double v : row) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
}
