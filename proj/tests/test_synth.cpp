#include "pulsegrid/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "pulsegrid/ampd.hpp"
#include "pulsegrid/dsp.hpp"
#include "pulsegrid/features.hpp"

using namespace pulsegrid;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.n_subjects = 5;
    cfg.segments_per_subject = 2;
    cfg.seed = 7;
    return cfg;
}

std::filesystem::path temp_dir(const char* tag) {
    const auto dir = std::filesystem::temp_directory_path() / (std::string("pg_synth_") + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("generated records have the requested shape and ids") {
    const SynthOutput out = generate(small_config());
    REQUIRE(out.records.size() == 5);
    REQUIRE(out.truth.subjects.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& r = out.records[i];
        CHECK(r.fs == 125);
        CHECK(r.ecg.size() == 2 * 15 * 125);
        CHECK(r.abp.size() == r.ecg.size());
        CHECK(r.subject_id == out.truth.subjects[i].subject_id);
        CHECK(out.truth.subjects[i].window_labels.size() == 2);
        CHECK(out.truth.subjects[i].peak_indices.size() >= 3);
    }
    const std::set<std::string> ids(
        {out.records[0].subject_id, out.records[1].subject_id, out.records[2].subject_id,
         out.records[3].subject_id, out.records[4].subject_id});
    CHECK(ids.size() == 5);
}

TEST_CASE("noiseless planted peaks are recovered within one sample") {
    SynthConfig cfg = small_config();
    cfg.snr_db = std::numeric_limits<double>::infinity();
    cfg.abp_noise_mmhg = 0.0;
    const SynthOutput out = generate(cfg);
    for (std::size_t s = 0; s < out.records.size(); ++s) {
        const auto& rec = out.records[s];
        const auto& planted = out.truth.subjects[s].peak_indices;
        AmpdOptions opt;
        opt.max_scale = static_cast<std::size_t>(std::ceil(0.6 * rec.fs));
        // raw signal: the quiet margins are exactly flat, so any extra
        // detection would be a genuine false positive
        const PeakSet found = detect_peaks(rec.ecg, opt);
        // every planted peak has a detection within one sample, none spurious
        std::size_t matched = 0;
        for (std::size_t p : planted)
            for (std::size_t q : found.indices)
                if (p >= q ? p - q <= 1 : q - p <= 1) {
                    ++matched;
                    break;
                }
        CHECK(matched == planted.size());
        CHECK(found.indices.size() == planted.size());
    }
}

TEST_CASE("planted window labels match derive_labels on the clean records") {
    SynthConfig cfg = small_config();
    cfg.abp_noise_mmhg = 0.0;
    const SynthOutput out = generate(cfg);
    for (std::size_t s = 0; s < out.records.size(); ++s) {
        const auto segs = segment(out.records[s], cfg.segments_per_subject);
        for (std::size_t w = 0; w < segs.size(); ++w) {
            const BpLabels truth = out.truth.subjects[s].window_labels[w];
            CHECK(std::abs(segs[w].labels.dbp - truth.dbp) < 0.5);
            CHECK(std::abs(segs[w].labels.sbp - truth.sbp) < 0.5);
            CHECK(std::abs(segs[w].labels.map - truth.map) < 0.5);
        }
    }
}

TEST_CASE("labels stay plausible and obey the MAP identity") {
    SynthConfig cfg;
    cfg.n_subjects = 12;
    cfg.seed = 19;
    const SynthOutput out = generate(cfg);
    for (const auto& s : out.truth.subjects)
        for (const auto& l : s.window_labels) {
            CHECK(l.dbp >= 45.0);
            CHECK(l.dbp <= 115.0);
            CHECK(l.sbp >= 70.0);
            CHECK(l.sbp <= 200.0);
            CHECK(l.sbp > l.dbp);
            CHECK(std::abs(l.map - (2.0 * l.dbp + l.sbp) / 3.0) < 1e-9);
        }
}

TEST_CASE("atrial-fibrillation mode produces irregular rhythms") {
    SynthConfig cfg;
    cfg.n_subjects = 20;
    cfg.segments_per_subject = 2;
    cfg.af_mode = true;
    cfg.seed = 23;
    const SynthOutput out = generate(cfg);
    std::size_t irregular = 0;
    for (const auto& s : out.truth.subjects)
        if (!check_regularity(s.peak_indices, 125)) ++irregular;
    CHECK(irregular >= 19);  // >= 95%

    // control: the default mode stays regular for most subjects
    cfg.af_mode = false;
    const SynthOutput reg = generate(cfg);
    std::size_t regular = 0;
    for (const auto& s : reg.truth.subjects)
        if (check_regularity(s.peak_indices, 125)) ++regular;
    CHECK(regular >= 19);
}

TEST_CASE("generation is deterministic in the seed") {
    const SynthOutput a = generate(small_config());
    const SynthOutput b = generate(small_config());
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].ecg == b.records[i].ecg);
        CHECK(a.records[i].abp == b.records[i].abp);
        CHECK(a.truth.subjects[i].peak_indices == b.truth.subjects[i].peak_indices);
    }
    SynthConfig other = small_config();
    other.seed = 8;
    const SynthOutput c = generate(other);
    CHECK(a.records[0].ecg != c.records[0].ecg);
}

TEST_CASE("write_records round-trips through the loader, text and binary") {
    const SynthOutput out = generate(small_config());
    for (bool binary : {false, true}) {
        const auto dir = temp_dir(binary ? "bin" : "txt");
        write_records(out.records, out.truth, dir, binary);
        const auto loaded = load_records(dir);
        REQUIRE(loaded.size() == out.records.size());
        for (const auto& rec : out.records) {
            bool found = false;
            for (const auto& l : loaded)
                if (l.subject_id == rec.subject_id) {
                    found = true;
                    CHECK(l.fs == rec.fs);
                    REQUIRE(l.ecg.size() == rec.ecg.size());
                    for (std::size_t i = 0; i < rec.ecg.size(); ++i) {
                        CHECK(l.ecg[i] == doctest::Approx(rec.ecg[i]).epsilon(1e-12));
                        CHECK(l.abp[i] == doctest::Approx(rec.abp[i]).epsilon(1e-12));
                    }
                }
            CHECK(found);
        }
        const GroundTruth gt = load_ground_truth(dir / "ground_truth.txt");
        REQUIRE(gt.subjects.size() == out.truth.subjects.size());
        for (std::size_t s = 0; s < gt.subjects.size(); ++s) {
            const auto& a = out.truth.subjects[s];
            bool found = false;
            for (const auto& g : gt.subjects)
                if (g.subject_id == a.subject_id) {
                    found = true;
                    CHECK(g.peak_indices == a.peak_indices);
                    REQUIRE(g.window_labels.size() == a.window_labels.size());
                    for (std::size_t w = 0; w < a.window_labels.size(); ++w)
                        CHECK(g.window_labels[w].sbp ==
                              doctest::Approx(a.window_labels[w].sbp).epsilon(1e-12));
                    CHECK(g.r_amp == doctest::Approx(a.r_amp).epsilon(1e-12));
                    CHECK(g.hr_base == doctest::Approx(a.hr_base).epsilon(1e-12));
                }
            CHECK(found);
        }
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("invalid configurations are rejected") {
    SynthConfig cfg;
    cfg.n_subjects = 0;
    CHECK_THROWS_AS(generate(cfg), InvalidConfig);
    cfg = SynthConfig{};
    cfg.hr_lo = 10.0;
    CHECK_THROWS_AS(generate(cfg), InvalidConfig);
    cfg = SynthConfig{};
    cfg.hr_lo = 120.0;
    cfg.hr_hi = 60.0;
    CHECK_THROWS_AS(generate(cfg), InvalidConfig);
    cfg = SynthConfig{};
    cfg.snr_db = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(generate(cfg), InvalidConfig);
}

TEST_CASE("the feature pipeline learns from a generated corpus") {
    SynthConfig cfg;
    cfg.n_subjects = 6;
    cfg.segments_per_subject = 1;
    cfg.seed = 31;
    const SynthOutput out = generate(cfg);
    std::vector<SegmentRecord> segs;
    for (const auto& rec : out.records) {
        auto s = segment(rec, 1);
        segs.insert(segs.end(), s.begin(), s.end());
    }
    for (auto& s : segs) preprocess_segment(s, BandSpec{});
    const FeatureDataset ds = assemble_dataset(segs, 625);
    CHECK(ds.size() > 0);
    std::set<std::string> subjects(ds.subject.begin(), ds.subject.end());
    CHECK(subjects.size() >= 5);  // nearly every subject contributes beats
}
