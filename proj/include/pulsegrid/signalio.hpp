#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

struct BpLabels {
    double dbp = 0.0;  // mmHg, window minimum
    double sbp = 0.0;  // mmHg, window maximum
    double map = 0.0;  // (2*dbp + sbp) / 3
};

struct WaveformRecord {
    std::string subject_id;
    int fs = 0;  // Hz
    std::vector<double> ecg;
    std::vector<double> abp;  // same length as ecg
};

/// One 15 s paired window with labels derived from its ABP samples.
struct SegmentRecord {
    std::string subject_id;
    int fs = 0;
    std::vector<double> ecg_window;
    std::vector<double> abp_window;
    BpLabels labels;
};

inline constexpr double kSegmentSeconds = 15.0;
inline constexpr double kMinPlausibleBp = 30.0;   // mmHg
inline constexpr double kMaxPlausibleBp = 300.0;  // mmHg

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void validate_record(const WaveformRecord& rec) {
    if (rec.fs <= 0)
        throw UnsupportedRate("subject '" + rec.subject_id + "' has fs " + std::to_string(rec.fs));
    if (rec.ecg.size() != rec.abp.size())
        throw MalformedRecord("subject '" + rec.subject_id + "' channel length mismatch");
    if (!all_finite(rec.ecg) || !all_finite(rec.abp))
        throw MalformedRecord("subject '" + rec.subject_id + "' contains non-finite sample");
}

}  // namespace detail

inline BpLabels derive_labels(const std::vector<double>& abp_window, int fs) {
    const std::size_t expect = static_cast<std::size_t>(kSegmentSeconds * fs);
    if (fs <= 0) throw UnsupportedRate("fs " + std::to_string(fs));
    if (abp_window.size() != expect)
        throw MalformedRecord("ABP window length " + std::to_string(abp_window.size()) +
                              " != 15 s at fs " + std::to_string(fs));
    if (!detail::all_finite(abp_window)) throw MalformedRecord("non-finite ABP sample");

    const auto [lo, hi] = std::minmax_element(abp_window.begin(), abp_window.end());
    BpLabels labels;
    labels.dbp = *lo;
    labels.sbp = *hi;
    labels.map = (2.0 * labels.dbp + labels.sbp) / 3.0;
    if (labels.dbp < kMinPlausibleBp || labels.sbp > kMaxPlausibleBp || labels.dbp >= labels.sbp)
        throw ImplausibleLabel("dbp=" + std::to_string(labels.dbp) +
                               " sbp=" + std::to_string(labels.sbp));
    return labels;
}

/// Non-overlapping consecutive 15 s windows from sample 0, each labeled from
/// its own ABP window.
inline std::vector<SegmentRecord> segment(const WaveformRecord& rec, std::size_t count) {
    detail::validate_record(rec);
    const std::size_t win = static_cast<std::size_t>(kSegmentSeconds * rec.fs);
    if (rec.ecg.size() < count * win)
        throw TooShort("record '" + rec.subject_id + "' has " + std::to_string(rec.ecg.size()) +
                       " samples, needs " + std::to_string(count * win));
    std::vector<SegmentRecord> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        SegmentRecord seg;
        seg.subject_id = rec.subject_id;
        seg.fs = rec.fs;
        seg.ecg_window.assign(rec.ecg.begin() + s * win, rec.ecg.begin() + (s + 1) * win);
        seg.abp_window.assign(rec.abp.begin() + s * win, rec.abp.begin() + (s + 1) * win);
        seg.labels = derive_labels(seg.abp_window, rec.fs);
        out.push_back(std::move(seg));
    }
    return out;
}

/// True iff the RR sequence is regular enough for admission: max deviation of
/// any RR interval from the median RR is at most `tolerance` of the median.
inline bool check_regularity(const std::vector<std::size_t>& peaks, int fs,
                             double tolerance = 0.20) {
    if (peaks.size() < 3) throw TooFewPeaks("regularity check needs >= 3 peaks");
    std::vector<double> rr;
    rr.reserve(peaks.size() - 1);
    for (std::size_t i = 1; i < peaks.size(); ++i)
        rr.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / fs);
    std::vector<double> sorted = rr;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double med = (n % 2) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (double d : rr)
        if (std::abs(d - med) > tolerance * med) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Record format.
//
// Text: per subject, a header line `subject_id,fs,n_samples` followed by
// n_samples lines of `ecg_value,abp_value`. Several subjects may share one
// file. Binary (one subject per file, subject_id = filename stem): 16-byte
// header -- magic "PGRD", u32 fs, u64 n -- then n interleaved little-endian
// f64 pairs (ecg, abp).
// ---------------------------------------------------------------------------

inline constexpr char kBinaryMagic[4] = {'P', 'G', 'R', 'D'};

namespace detail {

inline double parse_double(const std::string& tok, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw MalformedRecord(ctx + ": trailing junk in '" + tok + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw MalformedRecord(ctx + ": cannot parse '" + tok + "'");
    }
}

inline std::vector<WaveformRecord> load_text_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoFailure("cannot open " + p.string());
    std::vector<WaveformRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream hdr(line);
        std::string id, fs_s, n_s;
        if (!std::getline(hdr, id, ',') || !std::getline(hdr, fs_s, ',') ||
            !std::getline(hdr, n_s))
            throw MalformedRecord(p.string() + ": bad header '" + line + "'");
        WaveformRecord rec;
        rec.subject_id = id;
        rec.fs = static_cast<int>(parse_double(fs_s, p.string()));
        const long long n = std::stoll(n_s);
        if (n < 0) throw MalformedRecord(p.string() + ": negative sample count");
        rec.ecg.reserve(n);
        rec.abp.reserve(n);
        for (long long i = 0; i < n; ++i) {
            if (!std::getline(in, line))
                throw MalformedRecord(p.string() + ": subject '" + id + "' truncated");
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw MalformedRecord(p.string() + ": missing channel in '" + line + "'");
            rec.ecg.push_back(parse_double(line.substr(0, comma), p.string()));
            rec.abp.push_back(parse_double(line.substr(comma + 1), p.string()));
        }
        validate_record(rec);
        out.push_back(std::move(rec));
    }
    return out;
}

inline WaveformRecord load_binary_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + p.string());
    char magic[4];
    std::uint32_t fs = 0;
    std::uint64_t n = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&fs), 4);
    in.read(reinterpret_cast<char*>(&n), 8);
    if (!in || std::memcmp(magic, kBinaryMagic, 4) != 0)
        throw MalformedRecord(p.string() + ": bad binary header");
    WaveformRecord rec;
    rec.subject_id = p.stem().string();
    rec.fs = static_cast<int>(fs);
    rec.ecg.resize(n);
    rec.abp.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        double pair[2];
        in.read(reinterpret_cast<char*>(pair), 16);
        if (!in) throw MalformedRecord(p.string() + ": truncated sample data");
        rec.ecg[i] = pair[0];
        rec.abp[i] = pair[1];
    }
    validate_record(rec);
    return rec;
}

inline bool looks_binary(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    return in && std::memcmp(magic, kBinaryMagic, 4) == 0;
}

}  // namespace detail

/// Load one record file or every record file in a dataset directory.
/// Binary vs text is sniffed from the magic bytes.
inline std::vector<WaveformRecord> load_records(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw IoFailure("no such path: " + path.string());

    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path)) {
            if (!e.is_regular_file()) continue;
            const std::string name = e.path().filename().string();
            // sidecars living next to the record files
            if (name.rfind("ground_truth", 0) == 0 || name.rfind("manifest", 0) == 0) continue;
            files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }

    std::vector<WaveformRecord> out;
    for (const auto& f : files) {
        if (detail::looks_binary(f)) {
            out.push_back(detail::load_binary_file(f));
        } else {
            auto recs = detail::load_text_file(f);
            for (auto& r : recs) out.push_back(std::move(r));
        }
    }
    return out;
}

inline void write_records_text(const std::vector<WaveformRecord>& records,
                               const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoFailure("cannot write " + file.string());
    out.precision(17);
    for (const auto& rec : records) {
        detail::validate_record(rec);
        out << rec.subject_id << ',' << rec.fs << ',' << rec.ecg.size() << '\n';
        for (std::size_t i = 0; i < rec.ecg.size(); ++i)
            out << rec.ecg[i] << ',' << rec.abp[i] << '\n';
    }
    if (!out) throw IoFailure("write failed: " + file.string());
}

/// One binary file per record, named `<subject_id>.pgrd`, under `dir`.
inline void write_records_binary(const std::vector<WaveformRecord>& records,
                                 const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& rec : records) {
        detail::validate_record(rec);
        std::ofstream out(dir / (rec.subject_id + ".pgrd"), std::ios::binary);
        if (!out) throw IoFailure("cannot write binary record for " + rec.subject_id);
        out.write(kBinaryMagic, 4);
        const std::uint32_t fs32 = static_cast<std::uint32_t>(rec.fs);
        const std::uint64_t n = rec.ecg.size();
        out.write(reinterpret_cast<const char*>(&fs32), 4);
        out.write(reinterpret_cast<const char*>(&n), 8);
        for (std::uint64_t i = 0; i < n; ++i) {
            const double pair[2] = {rec.ecg[i], rec.abp[i]};
            out.write(reinterpret_cast<const char*>(pair), 16);
        }
        if (!out) throw IoFailure("write failed for " + rec.subject_id);
    }
}

}  // namespace pulsegrid
