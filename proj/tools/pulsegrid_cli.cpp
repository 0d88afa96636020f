// pulsegrid command-line front-end: synth, preprocess, peaks, features,
// train, evaluate, report.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pulsegrid/ampd.hpp"
#include "pulsegrid/boosting.hpp"
#include "pulsegrid/dsp.hpp"
#include "pulsegrid/errors.hpp"
#include "pulsegrid/eval.hpp"
#include "pulsegrid/features.hpp"
#include "pulsegrid/pca.hpp"
#include "pulsegrid/signalio.hpp"
#include "pulsegrid/synth.hpp"

namespace fs = std::filesystem;
using namespace pulsegrid;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
}

std::string path_digest(const fs::path& p) {
    if (!fs::exists(p)) return "missing";
    if (fs::is_regular_file(p)) return file_digest(p);
    std::uint64_t h = 1469598103934665603ULL;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string d = f.filename().string() + ":" + file_digest(f);
        for (unsigned char c : d) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
}

/// Every run writes a manifest so reported numbers stay auditable.
void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "manifest.txt");
    out << "tool=pulsegrid " << kVersion << '\n';
    out << "subcommand=" << subcommand << '\n';
    for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value,
                           std::uint64_t fallback) {
    if (opt->count() > 0) return flag_value;  // flag or config file
    if (const char* env = std::getenv("PULSEGRID_SEED")) return std::stoull(env);
    return fallback;
}

std::vector<SegmentRecord> segment_all(const std::vector<WaveformRecord>& records) {
    std::vector<SegmentRecord> segs;
    for (const auto& rec : records) {
        const std::size_t win = static_cast<std::size_t>(kSegmentSeconds * rec.fs);
        const std::size_t count = rec.ecg.size() / win;
        if (count == 0) continue;
        auto s = segment(rec, count);
        segs.insert(segs.end(), std::make_move_iterator(s.begin()),
                    std::make_move_iterator(s.end()));
    }
    return segs;
}

// dataset file: header `n_rows,n_cols`, then per row n_cols feature values
// followed by dbp, map, sbp and the subject id

void save_dataset(const FeatureDataset& ds, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw IoFailure("cannot write " + file.string());
    out.precision(17);
    out << ds.size() << ',' << ds.cols << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.rows[i]) out << v << ',';
        out << ds.dbp[i] << ',' << ds.map[i] << ',' << ds.sbp[i] << ',' << ds.subject[i] << '\n';
    }
    if (!out) throw IoFailure("write failed: " + file.string());
}

FeatureDataset load_dataset(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoFailure("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw MalformedRecord("empty dataset file");
    std::size_t n = 0, cols = 0;
    {
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        n = std::stoul(tok);
        std::getline(ss, tok, ',');
        cols = std::stoul(tok);
    }
    FeatureDataset ds;
    ds.cols = cols;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw MalformedRecord("dataset truncated at row " + std::to_string(i));
        std::istringstream ss(line);
        std::string tok;
        std::vector<double> row;
        row.reserve(cols);
        for (std::size_t j = 0; j < cols + 3; ++j) {
            if (!std::getline(ss, tok, ','))
                throw MalformedRecord("short dataset row " + std::to_string(i));
            row.push_back(std::stod(tok));
        }
        if (!std::getline(ss, tok)) throw MalformedRecord("missing subject in row " + std::to_string(i));
        ds.sbp.push_back(row.back());
        row.pop_back();
        ds.map.push_back(row.back());
        row.pop_back();
        ds.dbp.push_back(row.back());
        row.pop_back();
        ds.rows.push_back(std::move(row));
        ds.subject.push_back(tok);
    }
    if (ds.rows.empty()) throw EmptyDataset(file.string());
    return ds;
}

bool is_dataset_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) return false;
    std::ifstream in(p);
    std::string line;
    if (!std::getline(in, line)) return false;
    return std::count(line.begin(), line.end(), ',') == 1;  // `n_rows,n_cols`
}

FeatureDataset dataset_from_path(const fs::path& in, const BandSpec& band, std::size_t L) {
    if (is_dataset_file(in)) return load_dataset(in);
    auto records = load_records(in);
    auto segs = segment_all(records);
    for (auto& s : segs) preprocess_segment(s, band);
    return assemble_dataset(segs, L);
}

void write_bland_altman_csv(const BlandAltman& ba, const fs::path& file) {
    std::ofstream out(file);
    out.precision(17);
    out << "mean,diff\n";
    for (const auto& [m, d] : ba.points) out << m << ',' << d << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulsegrid: whole-based ECG blood-pressure estimation pipeline"};
    app.set_config("--config");
    app.require_subcommand(1);

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic paired ECG/ABP corpus");
    SynthConfig scfg;
    std::string synth_out = "synth_out";
    std::string synth_format = "text";
    double synth_snr = 20.0;
    bool synth_noiseless = false;
    synth_cmd->add_option("--out", synth_out, "output dataset directory");
    synth_cmd->add_option("--subjects", scfg.n_subjects, "number of subjects");
    synth_cmd->add_option("--segments", scfg.segments_per_subject, "15 s segments per subject");
    synth_cmd->add_option("--fs", scfg.fs, "sampling frequency (Hz)");
    synth_cmd->add_option("--snr", synth_snr, "ECG SNR in dB");
    synth_cmd->add_flag("--noiseless", synth_noiseless, "disable ECG noise");
    synth_cmd->add_flag("--af", scfg.af_mode, "atrial-fibrillation mode (irregular RR, pulse deficit)");
    synth_cmd->add_option("--format", synth_format, "record writer output: text|binary")
        ->check(CLI::IsMember({"text", "binary"}));
    auto* synth_seed = synth_cmd->add_option("--seed", scfg.seed, "generator seed");

    // --- preprocess ---
    auto* pre_cmd = app.add_subcommand("preprocess", "bandpass + normalize 15 s segments");
    std::string pre_in, pre_out = "preprocessed.txt";
    BandSpec pre_band;
    pre_cmd->add_option("--in", pre_in, "records file or dataset directory")->required();
    pre_cmd->add_option("--out", pre_out, "output records file");
    pre_cmd->add_option("--lo", pre_band.lo_hz, "low cutoff (Hz)");
    pre_cmd->add_option("--hi", pre_band.hi_hz, "high cutoff (Hz)");

    // --- peaks ---
    auto* peaks_cmd = app.add_subcommand("peaks", "detect R peaks on preprocessed segments");
    std::string peaks_in;
    bool peaks_det = false;
    std::uint64_t peaks_seed = 0;
    peaks_cmd->add_option("--in", peaks_in, "records file or dataset directory")->required();
    peaks_cmd->add_flag("--deterministic", peaks_det, "constant 0.5 scalogram fill");
    auto* peaks_seed_opt = peaks_cmd->add_option("--seed", peaks_seed, "scalogram RNG seed");

    // --- features ---
    auto* feat_cmd = app.add_subcommand("features", "extract the whole-based feature matrix");
    std::string feat_in, feat_out = "dataset.csv";
    std::size_t feat_len = kDefaultBeatLength;
    BandSpec feat_band;
    feat_cmd->add_option("--in", feat_in, "records file or dataset directory")->required();
    feat_cmd->add_option("--out", feat_out, "output dataset file");
    feat_cmd->add_option("--length", feat_len, "beat vector length");
    feat_cmd->add_option("--lo", feat_band.lo_hz, "low cutoff (Hz)");
    feat_cmd->add_option("--hi", feat_band.hi_hz, "high cutoff (Hz)");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "fit PCA + three boosted ensembles");
    std::string train_in, train_out = "model.txt";
    BoostOptions train_boost;
    double train_retain = 0.98;
    std::size_t train_len = kDefaultBeatLength;
    std::string train_loss = "linear";
    train_cmd->add_option("--in", train_in, "dataset file or records path")->required();
    train_cmd->add_option("--out", train_out, "output model file");
    train_cmd->add_option("--rounds", train_boost.rounds, "boosting rounds");
    train_cmd->add_option("--depth", train_boost.max_depth, "tree depth");
    train_cmd->add_option("--min-leaf", train_boost.min_leaf, "min samples per leaf");
    train_cmd->add_option("--loss", train_loss, "linear|square|exponential");
    train_cmd->add_option("--retain", train_retain, "PCA retained energy fraction");
    train_cmd->add_option("--length", train_len, "beat vector length");
    auto* train_seed_opt = train_cmd->add_option("--seed", train_boost.seed, "training seed");

    // --- evaluate ---
    auto* eval_cmd = app.add_subcommand("evaluate", "subject-disjoint k-fold CV + standards report");
    std::string eval_in, eval_out_dir = "eval_out", eval_split = "subject", eval_loss = "linear";
    std::size_t eval_k = 10, eval_len = kDefaultBeatLength;
    std::uint64_t eval_seed = 1;
    CvOptions eval_opts;
    BandSpec eval_band;
    eval_cmd->add_option("--in", eval_in, "dataset file or records path")->required();
    eval_cmd->add_option("--out-dir", eval_out_dir, "output directory");
    eval_cmd->add_option("--k", eval_k, "fold count");
    eval_cmd->add_option("--split-by", eval_split, "subject|record")
        ->check(CLI::IsMember({"subject", "record"}));
    eval_cmd->add_option("--rounds", eval_opts.boost.rounds, "boosting rounds");
    eval_cmd->add_option("--depth", eval_opts.boost.max_depth, "tree depth");
    eval_cmd->add_option("--min-leaf", eval_opts.boost.min_leaf, "min samples per leaf");
    eval_cmd->add_option("--loss", eval_loss, "linear|square|exponential");
    eval_cmd->add_option("--retain", eval_opts.pca_retain, "PCA retained energy fraction");
    eval_cmd->add_flag("--pca-global", eval_opts.pca_global,
                       "fit PCA once on all rows instead of per fold (leaks test statistics)");
    eval_cmd->add_option("--length", eval_len, "beat vector length");
    bool eval_sequential = false;
    eval_cmd->add_flag("--sequential", eval_sequential, "evaluate folds sequentially");
    auto* eval_seed_opt = eval_cmd->add_option("--seed", eval_seed, "fold + training seed");

    // --- report ---
    auto* rep_cmd = app.add_subcommand("report", "grade externally supplied summary tables");
    std::string rep_from = "tables";
    std::vector<std::string> rep_bhs, rep_aami;
    rep_cmd->add_option("--from", rep_from, "input kind (tables)")
        ->check(CLI::IsMember({"tables"}));
    rep_cmd->add_option("--bhs", rep_bhs, "pct5,pct10,pct15 triple (repeatable)");
    rep_cmd->add_option("--aami", rep_aami, "me,sd,subjects triple (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth_cmd->parsed()) {
            scfg.seed = resolve_seed(synth_seed, scfg.seed, scfg.seed);
            scfg.snr_db = synth_noiseless ? std::numeric_limits<double>::infinity() : synth_snr;
            const SynthOutput out = generate(scfg);
            write_records(out.records, out.truth, synth_out, synth_format == "binary");
            write_manifest(synth_out, "synth",
                           {{"subjects", std::to_string(scfg.n_subjects)},
                            {"segments", std::to_string(scfg.segments_per_subject)},
                            {"fs", std::to_string(scfg.fs)},
                            {"snr_db", std::to_string(scfg.snr_db)},
                            {"af", scfg.af_mode ? "1" : "0"},
                            {"format", synth_format},
                            {"seed", std::to_string(scfg.seed)}});
            std::cout << "wrote " << out.records.size() << " records to " << synth_out << '\n';
        } else if (pre_cmd->parsed()) {
            auto records = load_records(pre_in);
            auto segs = segment_all(records);
            std::vector<WaveformRecord> out;
            for (auto& s : segs) {
                preprocess_segment(s, pre_band);
                out.push_back({s.subject_id, s.fs, s.ecg_window, s.abp_window});
            }
            write_records_text(out, pre_out);
            write_manifest(fs::path(pre_out).parent_path().empty()
                               ? "."
                               : fs::path(pre_out).parent_path(),
                           "preprocess",
                           {{"in", pre_in},
                            {"in_digest", path_digest(pre_in)},
                            {"lo_hz", std::to_string(pre_band.lo_hz)},
                            {"hi_hz", std::to_string(pre_band.hi_hz)}});
            std::cout << "wrote " << out.size() << " preprocessed segments to " << pre_out << '\n';
        } else if (peaks_cmd->parsed()) {
            peaks_seed = resolve_seed(peaks_seed_opt, peaks_seed, 0);
            auto records = load_records(peaks_in);
            auto segs = segment_all(records);
            for (auto& s : segs) {
                preprocess_segment(s, BandSpec{});
                AmpdOptions opt;
                opt.deterministic = peaks_det;
                opt.seed = peaks_seed;
                opt.max_scale = static_cast<std::size_t>(std::ceil(0.6 * s.fs));
                const PeakSet p = detect_peaks(s.ecg_window, opt);
                std::cout << "# " << s.subject_id << '\n';
                for (std::size_t i : p.indices) std::cout << i << '\n';
            }
        } else if (feat_cmd->parsed()) {
            const FeatureDataset ds = dataset_from_path(feat_in, feat_band, feat_len);
            save_dataset(ds, feat_out);
            write_manifest(fs::path(feat_out).parent_path().empty()
                               ? "."
                               : fs::path(feat_out).parent_path(),
                           "features",
                           {{"in", feat_in},
                            {"in_digest", path_digest(feat_in)},
                            {"length", std::to_string(feat_len)},
                            {"lo_hz", std::to_string(feat_band.lo_hz)},
                            {"hi_hz", std::to_string(feat_band.hi_hz)}});
            std::cout << "wrote " << ds.size() << "x" << ds.cols << " dataset to " << feat_out << '\n';
        } else if (train_cmd->parsed()) {
            train_boost.seed = resolve_seed(train_seed_opt, train_boost.seed, 0);
            train_boost.loss = boost_loss_from_string(train_loss);
            const FeatureDataset ds = dataset_from_path(train_in, BandSpec{}, train_len);
            const PcaModel pca = pca_fit(ds.rows, train_retain);
            const Matrix Xr = pca_transform_all(pca, ds.rows);
            const TargetModels models = train_targets(Xr, ds.dbp, ds.map, ds.sbp, train_boost);
            std::ofstream out(train_out);
            if (!out) throw IoFailure("cannot write " + train_out);
            pca_save(pca, out);
            ensemble_save(models.dbp, out);
            ensemble_save(models.map, out);
            ensemble_save(models.sbp, out);
            write_manifest(fs::path(train_out).parent_path().empty()
                               ? "."
                               : fs::path(train_out).parent_path(),
                           "train",
                           {{"in", train_in},
                            {"in_digest", path_digest(train_in)},
                            {"rounds", std::to_string(train_boost.rounds)},
                            {"depth", std::to_string(train_boost.max_depth)},
                            {"min_leaf", std::to_string(train_boost.min_leaf)},
                            {"loss", train_loss},
                            {"retain", std::to_string(train_retain)},
                            {"pca_k", std::to_string(pca.k)},
                            {"seed", std::to_string(train_boost.seed)}});
            std::cout << "trained 3 ensembles (pca k=" << pca.k << ") -> " << train_out << '\n';
        } else if (eval_cmd->parsed()) {
            eval_seed = resolve_seed(eval_seed_opt, eval_seed, 1);
            eval_opts.parallel_folds = !eval_sequential;
            eval_opts.boost.loss = boost_loss_from_string(eval_loss);
            eval_opts.boost.seed = eval_seed;
            const FeatureDataset ds = dataset_from_path(eval_in, eval_band, eval_len);

            std::vector<std::size_t> folds;
            if (eval_split == "subject") {
                const FoldPlan plan = make_folds(ds.subject, eval_k, eval_seed);
                folds = row_folds(ds, plan);
            } else {
                folds = row_folds_by_record(ds.size(), eval_k, eval_seed);
            }
            const CvResult cv = run_cv(ds, folds, eval_k, eval_opts);

            std::set<std::string> subjects(ds.subject.begin(), ds.subject.end());
            EvalReport rep;
            rep.dbp = make_target_report(cv.dbp, subjects.size());
            rep.map = make_target_report(cv.map, subjects.size());
            rep.sbp = make_target_report(cv.sbp, subjects.size());
            rep.k_folds = eval_k;
            rep.split_mode = eval_split;
            rep.options = eval_opts;
            rep.fold_seed = eval_seed;
            rep.dataset_digest = path_digest(eval_in);
            rep.pca_k_per_fold = cv.pca_k_per_fold;

            fs::create_directories(eval_out_dir);
            {
                std::ofstream out(fs::path(eval_out_dir) / "report.txt");
                write_report(rep, out);
            }
            write_bland_altman_csv(rep.dbp.ba, fs::path(eval_out_dir) / "bland_altman_dbp.csv");
            write_bland_altman_csv(rep.map.ba, fs::path(eval_out_dir) / "bland_altman_map.csv");
            write_bland_altman_csv(rep.sbp.ba, fs::path(eval_out_dir) / "bland_altman_sbp.csv");
            {
                std::ofstream out(fs::path(eval_out_dir) / "report_tables.csv");
                char buf[256];
                out << "# BHS cumulative error percentages\n";
                out << "target,pct5,pct10,pct15,grade\n";
                const TargetReport* t[3] = {&rep.dbp, &rep.map, &rep.sbp};
                const char* names[3] = {"DBP", "MAP", "SBP"};
                for (int i = 0; i < 3; ++i) {
                    std::snprintf(buf, sizeof(buf), "%s,%.0f,%.0f,%.0f,%c\n", names[i],
                                  t[i]->bhs.pct5, t[i]->bhs.pct10, t[i]->bhs.pct15, t[i]->bhs.grade);
                    out << buf;
                }
                out << "# AAMI\n";
                out << "target,me,sd,subjects,verdict\n";
                for (int i = 0; i < 3; ++i) {
                    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f,%zu,%s\n", names[i],
                                  t[i]->stats.me, t[i]->stats.sd, t[i]->stats.n_subjects,
                                  t[i]->aami.pass ? "pass" : "fail");
                    out << buf;
                }
                out << "# MAE\n";
                out << "target,mae,sd\n";
                for (int i = 0; i < 3; ++i) {
                    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f\n", names[i], t[i]->stats.mae,
                                  t[i]->stats.mae_sd);
                    out << buf;
                }
            }
            write_manifest(eval_out_dir, "evaluate",
                           {{"in", eval_in},
                            {"in_digest", rep.dataset_digest},
                            {"k", std::to_string(eval_k)},
                            {"split_by", eval_split},
                            {"rounds", std::to_string(eval_opts.boost.rounds)},
                            {"depth", std::to_string(eval_opts.boost.max_depth)},
                            {"min_leaf", std::to_string(eval_opts.boost.min_leaf)},
                            {"loss", eval_loss},
                            {"retain", std::to_string(eval_opts.pca_retain)},
                            {"pca_global", eval_opts.pca_global ? "1" : "0"},
                            {"seed", std::to_string(eval_seed)}});
            std::cout << "evaluation artifacts written to " << eval_out_dir << '\n';
        } else if (rep_cmd->parsed()) {
            auto parse_triple = [](const std::string& s) {
                std::istringstream ss(s);
                std::string tok;
                std::vector<double> v;
                while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
                if (v.size() != 3) throw ConfigError("expected three comma-separated values, got '" + s + "'");
                return v;
            };
            for (const auto& s : rep_bhs) {
                const auto v = parse_triple(s);
                std::cout << "grade " << bhs_grade_from_percentages(v[0], v[1], v[2]) << '\n';
            }
            for (const auto& s : rep_aami) {
                const auto v = parse_triple(s);
                ErrorStats st;
                st.me = v[0];
                st.sd = v[1];
                st.n = st.n_subjects = static_cast<std::size_t>(v[2]);
                const AamiVerdict verdict = aami_check(st);
                if (verdict.pass) {
                    std::cout << "pass\n";
                } else {
                    std::cout << "fail(";
                    for (std::size_t i = 0; i < verdict.violations.size(); ++i)
                        std::cout << (i ? "," : "") << verdict.violations[i];
                    std::cout << ")\n";
                }
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
