#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pulsegrid/errors.hpp"
#include "pulsegrid/rng.hpp"
#include "pulsegrid/signalio.hpp"

namespace pulsegrid {

struct SynthConfig {
    std::size_t n_subjects = 40;
    int fs = 125;
    double hr_lo = 50.0;   // bpm
    double hr_hi = 143.0;  // bpm
    double snr_db = 20.0;  // +infinity = noiseless ECG
    double abp_noise_mmhg = 0.2;  // bounded uniform noise on ABP
    bool af_mode = false;
    std::size_t segments_per_subject = 3;
    std::uint64_t seed = 1;
};

struct SubjectTruth {
    std::string subject_id;
    std::vector<std::size_t> peak_indices;  // planted R peak sample indices
    std::vector<BpLabels> window_labels;    // per 15 s window, noise-free
    double r_amp = 0.0;
    double qrs_sigma_s = 0.0;
    double hr_base = 0.0;
};

struct GroundTruth {
    std::vector<SubjectTruth> subjects;
};

struct SynthOutput {
    std::vector<WaveformRecord> records;
    GroundTruth truth;
};

namespace detail {

/// Planted ECG->BP coupling: smooth monotone functions of normalized R
/// amplitude, QRS width and instantaneous HR with a mild interaction term.
/// All of these are observable in the normalized resampled beat shape, so the
/// learning problem is realizable.
struct Coupling {
    double an, wn;  // normalized morphology

    static double squash(double u) { return 0.5 + 0.5 * std::tanh(2.0 * (u - 0.5)); }

    double dbp(double hr) const {
        const double hn = std::clamp((hr - 50.0) / 93.0, 0.0, 1.0);
        const double u = 0.60 * an + 0.25 * hn + 0.10 * wn + 0.10 * an * hn - 0.05;
        return 56.0 + 40.0 * squash(u);  // within [56, 96]
    }
    double sbp(double hr) const {
        const double hn = std::clamp((hr - 50.0) / 93.0, 0.0, 1.0);
        const double v = 0.50 * hn + 0.35 * an + 0.10 * wn + 0.05 * an * wn - 0.05;
        return dbp(hr) + 28.0 + 42.0 * squash(v);  // within [84, 166]
    }
};

inline void add_gaussian_bump(std::vector<double>& sig, int fs, double center_s, double amp,
                              double sigma_s) {
    const double span = 4.0 * sigma_s;
    const long lo = std::max(0L, static_cast<long>(std::floor((center_s - span) * fs)));
    const long hi = std::min(static_cast<long>(sig.size()) - 1,
                             static_cast<long>(std::ceil((center_s + span) * fs)));
    for (long i = lo; i <= hi; ++i) {
        const double dt = static_cast<double>(i) / fs - center_s;
        sig[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * dt * dt / (sigma_s * sigma_s));
    }
}

/// Arterial pulse shape on [0,1): zero at both ends, unit peak near 0.37.
inline double pulse_shape(double phi) {
    return std::sin(3.141592653589793 * std::pow(std::clamp(phi, 0.0, 1.0), 0.7));
}

}  // namespace detail

/// Generate paired ECG/ABP records with complete ground truth. ECG beats are
/// sums of five Gaussian bumps (P,Q,R,S,T); the R and QRS parameters vary per
/// subject while P/T amplitudes are fixed, so per-segment min-max
/// normalization preserves the morphology information the coupling reads.
/// ABP pulses run from the coupled DBP floor to the SBP peak each beat.
/// Records start and end with ~1 s of flat margin so every planted R peak is
/// detectable at every admissible scale.
inline SynthOutput generate(const SynthConfig& cfg) {
    if (cfg.n_subjects < 1 || cfg.fs <= 0 || cfg.segments_per_subject < 1)
        throw InvalidConfig("need n_subjects >= 1, fs > 0, segments >= 1");
    if (!(cfg.hr_lo >= 30.0 && cfg.hr_hi <= 220.0 && cfg.hr_lo < cfg.hr_hi))
        throw InvalidConfig("hr range must lie within [30, 220]");
    if (std::isnan(cfg.snr_db)) throw InvalidConfig("snr_db is NaN");

    SynthOutput out;
    const int fs = cfg.fs;
    const std::size_t win = static_cast<std::size_t>(kSegmentSeconds * fs);
    const std::size_t n_samples = win * cfg.segments_per_subject;
    const double duration = static_cast<double>(n_samples) / fs;
    const double margin = 1.0;  // s of quiet baseline at both ends

    for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        Rng rng = Rng::child(cfg.seed, s);
        SubjectTruth truth;
        {
            std::ostringstream id;
            id << "synth" << (s < 10 ? "0" : "") << s;
            truth.subject_id = id.str();
        }
        truth.r_amp = rng.uniform(0.8, 1.6);
        truth.qrs_sigma_s = rng.uniform(0.012, 0.024);
        truth.hr_base = rng.uniform(cfg.hr_lo, cfg.hr_hi);
        const detail::Coupling coupling{(truth.r_amp - 0.8) / 0.8,
                                        (truth.qrs_sigma_s - 0.012) / 0.012};

        // beat schedule: R peaks on integer samples, quiet margins at both ends
        std::vector<double> r_times, beat_hr;
        double t = margin;
        while (true) {
            double hr = truth.hr_base * (1.0 + 0.02 * std::sin(2.0 * 3.141592653589793 * t / 30.0));
            if (cfg.af_mode)
                hr = truth.hr_base / (1.0 + rng.uniform(-0.45, 0.45));
            else
                hr *= 1.0 + 0.005 * rng.normal();
            hr = std::clamp(hr, 35.0, 210.0);
            const double rr = 60.0 / hr;
            if (t + rr > duration - margin) break;
            const double snapped = std::round(t * fs) / fs;
            r_times.push_back(snapped);
            beat_hr.push_back(hr);
            t += rr;
        }
        if (r_times.size() < 3) throw InvalidConfig("record too short for the HR range");

        WaveformRecord rec;
        rec.subject_id = truth.subject_id;
        rec.fs = fs;
        rec.ecg.assign(n_samples, 0.0);
        rec.abp.assign(n_samples, 0.0);

        for (std::size_t b = 0; b < r_times.size(); ++b) {
            const double tr = r_times[b];
            const double rr = (b + 1 < r_times.size())
                                  ? r_times[b + 1] - tr
                                  : 60.0 / beat_hr[b];
            const double qs = truth.qrs_sigma_s;
            detail::add_gaussian_bump(rec.ecg, fs, tr, truth.r_amp, qs);
            detail::add_gaussian_bump(rec.ecg, fs, tr - 1.8 * qs, -0.12 * truth.r_amp, 0.7 * qs);
            detail::add_gaussian_bump(rec.ecg, fs, tr + 1.8 * qs, -0.18 * truth.r_amp, 0.8 * qs);
            // fixed-amplitude, fixed-width T and P waves; both sit within half
            // an RR of a taller neighbor so multiscale peak detection rejects
            // them. The final beat carries no P wave -- physiologically it
            // belongs to the (absent) next beat, and nothing after it would
            // dominate it.
            detail::add_gaussian_bump(rec.ecg, fs, tr + 0.25 * rr, 0.30, 0.025);
            if (b + 1 < r_times.size())
                detail::add_gaussian_bump(rec.ecg, fs, tr + 0.90 * rr, 0.15, 0.018);
            truth.peak_indices.push_back(static_cast<std::size_t>(std::llround(tr * fs)));

            const double dbp = coupling.dbp(beat_hr[b]);
            const double sbp = coupling.sbp(beat_hr[b]);
            const bool deficit = cfg.af_mode && rng.uniform() < 0.3;  // pulse deficit
            // ABP covers [this R, next R) exactly so no gap samples are left
            const std::size_t i0 = static_cast<std::size_t>(std::llround(tr * fs));
            const std::size_t i1 = std::min(
                n_samples,
                b + 1 < r_times.size()
                    ? static_cast<std::size_t>(std::llround(r_times[b + 1] * fs))
                    : static_cast<std::size_t>(std::llround((tr + rr) * fs)));
            for (std::size_t i = i0; i < i1; ++i) {
                const double phi = static_cast<double>(i - i0) / static_cast<double>(i1 - i0);
                rec.abp[i] = deficit ? dbp : dbp + (sbp - dbp) * detail::pulse_shape(phi);
            }
        }

        // Deterministic micro-texture over the beat span (~0.5% of the R
        // amplitude). It anchors the multiscale peak detector's scale choice
        // near half an RR interval the way broadband physiological noise does,
        // while staying far too small to disturb the planted morphology. The
        // quiet margins are left untouched so they contain no local maxima.
        {
            Rng tex(rng.next_u64());
            const long t_lo = std::max(
                0L, static_cast<long>(std::llround((r_times.front() - 0.1) * fs)));
            const long t_hi = std::min(
                static_cast<long>(n_samples) - 1,
                static_cast<long>(std::llround((r_times.back() + 0.1) * fs)));
            for (long i = t_lo; i <= t_hi; ++i)
                rec.ecg[static_cast<std::size_t>(i)] += 0.005 * truth.r_amp * tex.normal();
        }

        // quiet margins: flat ECG, ABP held strictly inside the planted range
        {
            const detail::Coupling& c = coupling;
            const double first_fill = c.dbp(beat_hr.front()) +
                                      0.3 * (c.sbp(beat_hr.front()) - c.dbp(beat_hr.front()));
            const double last_fill = c.dbp(beat_hr.back()) +
                                     0.3 * (c.sbp(beat_hr.back()) - c.dbp(beat_hr.back()));
            const std::size_t first_i = static_cast<std::size_t>(std::llround(r_times.front() * fs));
            for (std::size_t i = 0; i < first_i; ++i) rec.abp[i] = first_fill;
            const double last_end = r_times.back() + 60.0 / beat_hr.back();
            const std::size_t last_i = std::min(
                n_samples, static_cast<std::size_t>(std::llround(last_end * fs)));
            for (std::size_t i = last_i; i < n_samples; ++i) rec.abp[i] = last_fill;
        }

        // noise-free window labels before noise is applied
        for (std::size_t wdx = 0; wdx < cfg.segments_per_subject; ++wdx) {
            const auto lo = rec.abp.begin() + wdx * win;
            const auto [mn, mx] = std::minmax_element(lo, lo + win);
            BpLabels lbl;
            lbl.dbp = *mn;
            lbl.sbp = *mx;
            lbl.map = (2.0 * lbl.dbp + lbl.sbp) / 3.0;
            truth.window_labels.push_back(lbl);
        }

        if (std::isfinite(cfg.snr_db)) {
            double power = 0.0;
            for (double x : rec.ecg) power += x * x;
            power /= static_cast<double>(n_samples);
            const double sigma = std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0));
            for (auto& x : rec.ecg) x += sigma * rng.normal();
        }
        if (cfg.abp_noise_mmhg > 0.0)
            for (auto& x : rec.abp) x += rng.uniform(-cfg.abp_noise_mmhg, cfg.abp_noise_mmhg);

        out.records.push_back(std::move(rec));
        out.truth.subjects.push_back(std::move(truth));
    }
    return out;
}

/// Record files plus a `ground_truth.txt` sidecar with labels, peaks and
/// subject parameter sections.
inline void write_records(const std::vector<WaveformRecord>& records, const GroundTruth& truth,
                          const std::filesystem::path& dir, bool binary = false) {
    std::filesystem::create_directories(dir);
    if (binary)
        write_records_binary(records, dir);
    else
        write_records_text(records, dir / "records.txt");

    std::ofstream out(dir / "ground_truth.txt");
    if (!out) throw IoFailure("cannot write ground truth sidecar");
    out.precision(17);
    out << "# labels subject_id,window_idx,dbp,sbp,map\n";
    for (const auto& s : truth.subjects)
        for (std::size_t w = 0; w < s.window_labels.size(); ++w)
            out << s.subject_id << ',' << w << ',' << s.window_labels[w].dbp << ','
                << s.window_labels[w].sbp << ',' << s.window_labels[w].map << '\n';
    out << "# peaks subject_id,peak_idx\n";
    for (const auto& s : truth.subjects)
        for (std::size_t p : s.peak_indices) out << s.subject_id << ',' << p << '\n';
    out << "# params subject_id,r_amp,qrs_sigma_s,hr_base\n";
    for (const auto& s : truth.subjects)
        out << s.subject_id << ',' << s.r_amp << ',' << s.qrs_sigma_s << ',' << s.hr_base << '\n';
    if (!out) throw IoFailure("ground truth write failed");
}

inline GroundTruth load_ground_truth(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoFailure("cannot open " + file.string());
    GroundTruth gt;
    auto find = [&](const std::string& id) -> SubjectTruth& {
        for (auto& s : gt.subjects)
            if (s.subject_id == id) return s;
        gt.subjects.emplace_back();
        gt.subjects.back().subject_id = id;
        return gt.subjects.back();
    };
    std::string line;
    int section = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# labels", 0) == 0) { section = 1; continue; }
        if (line.rfind("# peaks", 0) == 0) { section = 2; continue; }
        if (line.rfind("# params", 0) == 0) { section = 3; continue; }
        std::istringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (section == 1 && f.size() == 5) {
            SubjectTruth& s = find(f[0]);
            const std::size_t w = std::stoul(f[1]);
            if (s.window_labels.size() <= w) s.window_labels.resize(w + 1);
            s.window_labels[w] = {std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
        } else if (section == 2 && f.size() == 2) {
            find(f[0]).peak_indices.push_back(std::stoul(f[1]));
        } else if (section == 3 && f.size() == 4) {
            SubjectTruth& s = find(f[0]);
            s.r_amp = std::stod(f[1]);
            s.qrs_sigma_s = std::stod(f[2]);
            s.hr_base = std::stod(f[3]);
        } else {
            throw MalformedRecord("bad ground truth line '" + line + "'");
        }
    }
    return gt;
}

}  // namespace pulsegrid
