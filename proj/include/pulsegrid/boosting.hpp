#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pulsegrid/errors.hpp"
#include "pulsegrid/rng.hpp"

namespace pulsegrid {

using Matrix = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

struct TreeNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    double value = 0.0;      // weighted mean of targets at this leaf
    std::int64_t left = -1;  // child indices within RegressionTree::nodes
    std::int64_t right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t max_depth = 0;
    std::size_t min_leaf = 1;

    double predict(const std::vector<double>& x) const {
        std::size_t i = 0;
        while (!nodes[i].leaf)
            i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        return nodes[i].value;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;  // weighted SSE of the two children
};

/// Best split over all features for the sample subset `idx`. Candidates are
/// midpoints between consecutive distinct sorted feature values; ties break
/// toward the lowest feature index, then the lowest threshold.
inline SplitChoice best_split(const Matrix& X, const std::vector<double>& y,
                              const std::vector<double>& w, const std::vector<std::size_t>& idx,
                              std::size_t min_leaf) {
    const std::size_t m = idx.size();
    const std::size_t n_features = X[idx[0]].size();
    SplitChoice best;

    std::vector<std::size_t> order(m);
    std::vector<double> pw(m + 1), pwy(m + 1), pwyy(m + 1);
    for (std::size_t f = 0; f < n_features; ++f) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return X[idx[a]][f] < X[idx[b]][f];
        });
        pw[0] = pwy[0] = pwyy[0] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t r = idx[order[i]];
            pw[i + 1] = pw[i] + w[r];
            pwy[i + 1] = pwy[i] + w[r] * y[r];
            pwyy[i + 1] = pwyy[i] + w[r] * y[r] * y[r];
        }
        for (std::size_t i = min_leaf; i + min_leaf <= m; ++i) {
            const double xl = X[idx[order[i - 1]]][f];
            const double xr = X[idx[order[i]]][f];
            if (xl == xr) continue;
            const double thr = xl + 0.5 * (xr - xl);
            const double wl = pw[i], wr = pw[m] - pw[i];
            if (wl <= 0.0 || wr <= 0.0) continue;
            const double sl = pwyy[i] - pwy[i] * pwy[i] / wl;
            const double sr = (pwyy[m] - pwyy[i]) -
                              (pwy[m] - pwy[i]) * (pwy[m] - pwy[i]) / wr;
            const double score = sl + sr;
            if (!best.found || score < best.score - 1e-15 * (1.0 + std::abs(best.score)) ||
                (std::abs(score - best.score) <= 1e-15 * (1.0 + std::abs(best.score)) &&
                 (f < best.feature || (f == best.feature && thr < best.threshold)))) {
                best = {true, f, thr, score};
            }
        }
    }
    return best;
}

inline void grow(RegressionTree& tree, const Matrix& X, const std::vector<double>& y,
                 const std::vector<double>& w, std::vector<std::size_t> idx, std::size_t depth,
                 std::size_t node) {
    double wsum = 0.0, wy = 0.0, wyy = 0.0;
    for (std::size_t r : idx) {
        wsum += w[r];
        wy += w[r] * y[r];
        wyy += w[r] * y[r] * y[r];
    }
    const double mean = wsum > 0.0 ? wy / wsum : 0.0;
    tree.nodes[node].value = mean;
    const double impurity = wyy - wsum * mean * mean;

    if (depth >= tree.max_depth || idx.size() < 2 * tree.min_leaf || impurity <= 1e-12 * wsum)
        return;
    const SplitChoice split = best_split(X, y, w, idx, tree.min_leaf);
    if (!split.found) return;

    std::vector<std::size_t> li, ri;
    for (std::size_t r : idx)
        (X[r][split.feature] <= split.threshold ? li : ri).push_back(r);
    if (li.empty() || ri.empty()) return;

    tree.nodes[node].leaf = false;
    tree.nodes[node].feature = split.feature;
    tree.nodes[node].threshold = split.threshold;
    tree.nodes[node].left = static_cast<std::int64_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node].right = static_cast<std::int64_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    idx.clear();
    idx.shrink_to_fit();
    grow(tree, X, y, w, std::move(li), depth + 1,
         static_cast<std::size_t>(tree.nodes[node].left));
    grow(tree, X, y, w, std::move(ri), depth + 1,
         static_cast<std::size_t>(tree.nodes[node].right));
}

}  // namespace detail

/// Greedy top-down CART-style regression tree minimizing weighted sum of
/// squared deviations. max_depth 0 yields a single leaf with the weighted mean.
inline RegressionTree tree_fit(const Matrix& X, const std::vector<double>& y,
                               const std::vector<double>& w, std::size_t max_depth,
                               std::size_t min_leaf) {
    if (X.empty()) throw EmptyTrainingSet("tree_fit on empty matrix");
    if (X.size() != y.size() || X.size() != w.size())
        throw DimensionMismatch("X, y, w row counts differ");
    RegressionTree tree;
    tree.max_depth = max_depth;
    tree.min_leaf = std::max<std::size_t>(1, min_leaf);
    tree.nodes.emplace_back();
    std::vector<std::size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    detail::grow(tree, X, y, w, std::move(idx), 0, 0);
    return tree;
}

// ---------------------------------------------------------------------------
// AdaBoost.R2 (Drucker)
// ---------------------------------------------------------------------------

enum class BoostLoss { Linear, Square, Exponential };

inline const char* to_string(BoostLoss l) {
    switch (l) {
        case BoostLoss::Linear: return "linear";
        case BoostLoss::Square: return "square";
        default: return "exponential";
    }
}

inline BoostLoss boost_loss_from_string(const std::string& s) {
    if (s == "linear") return BoostLoss::Linear;
    if (s == "square") return BoostLoss::Square;
    if (s == "exponential") return BoostLoss::Exponential;
    throw ConfigError("unknown loss '" + s + "'");
}

struct BoostOptions {
    std::size_t rounds = 100;
    std::size_t max_depth = 4;
    std::size_t min_leaf = 5;
    BoostLoss loss = BoostLoss::Linear;
    std::uint64_t seed = 0;
};

struct BoostEnsemble {
    std::vector<RegressionTree> learners;
    std::vector<double> betas;  // per-learner beta in (0,1)
    std::string target;         // DBP | MAP | SBP
    BoostOptions options;
    std::string rng_algorithm = Rng::kAlgorithm;

    std::size_t rounds_completed() const { return learners.size(); }
};

/// Sample indices for one boosting round given the current weight
/// distribution. The default sampler is a weighted bootstrap of size n drawn
/// by inverse-CDF lookup on the cumulative weights.
using RoundSampler =
    std::function<std::vector<std::size_t>(const std::vector<double>& w, std::size_t round, Rng& rng)>;

inline std::vector<std::size_t> weighted_bootstrap(const std::vector<double>& w, Rng& rng) {
    const std::size_t n = w.size();
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += w[i];
        cdf[i] = acc;
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        idx[i] = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (idx[i] >= n) idx[i] = n - 1;
    }
    return idx;
}

// beta assigned to a learner that fits the training set exactly (D == 0)
inline constexpr double kPerfectLearnerBeta = 1e-10;

/// Per-round internals, filled when a trace sink is supplied to adaboost_fit.
struct BoostTrace {
    std::vector<std::vector<double>> losses;         // l_i per accepted round
    std::vector<double> avg_losses;                  // weighted average loss per round
    std::vector<std::vector<double>> weights_after;  // renormalized w after each round
};

inline BoostEnsemble adaboost_fit(const Matrix& X, const std::vector<double>& y,
                                  const BoostOptions& opt, const RoundSampler& sampler = {},
                                  BoostTrace* trace = nullptr) {
    const std::size_t n = X.size();
    if (n < 2) throw EmptyTrainingSet("AdaBoost.R2 needs >= 2 samples");
    if (y.size() != n) throw DimensionMismatch("X and y row counts differ");
    if (opt.rounds < 1) throw ConfigError("rounds must be >= 1");

    BoostEnsemble model;
    model.options = opt;
    Rng rng(opt.seed);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));

    for (std::size_t t = 0; t < opt.rounds; ++t) {
        const std::vector<std::size_t> draw =
            sampler ? sampler(w, t, rng) : weighted_bootstrap(w, rng);
        Matrix Xs;
        std::vector<double> ys;
        Xs.reserve(draw.size());
        ys.reserve(draw.size());
        for (std::size_t r : draw) {
            Xs.push_back(X[r]);
            ys.push_back(y[r]);
        }
        const std::vector<double> ws(draw.size(), 1.0 / static_cast<double>(draw.size()));
        RegressionTree tree = tree_fit(Xs, ys, ws, opt.max_depth, opt.min_leaf);

        std::vector<double> err(n);
        double dmax = 0.0;
        double yscale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err[i] = std::abs(tree.predict(X[i]) - y[i]);
            dmax = std::max(dmax, err[i]);
            yscale = std::max(yscale, std::abs(y[i]));
        }
        // Residuals at rounding-noise level mean the learner reproduces the
        // targets; normalizing by such a dmax would turn floating-point dust
        // into losses of 1.
        if (dmax <= 1e-12 * std::max(1.0, yscale)) {
            model.learners.push_back(std::move(tree));
            model.betas.push_back(kPerfectLearnerBeta);
            break;
        }
        double avg_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double l = err[i] / dmax;
            if (opt.loss == BoostLoss::Square)
                l = l * l;
            else if (opt.loss == BoostLoss::Exponential)
                l = 1.0 - std::exp(-l);
            err[i] = l;
            avg_loss += w[i] * l;
        }
        if (avg_loss >= 0.5) {
            if (model.learners.empty())
                throw NoLearnerAccepted("first round average loss " + std::to_string(avg_loss));
            break;
        }
        const double beta = avg_loss / (1.0 - avg_loss);
        model.learners.push_back(std::move(tree));
        model.betas.push_back(beta);

        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::pow(beta, 1.0 - err[i]);
            wsum += w[i];
        }
        for (auto& wi : w) wi /= wsum;

        if (trace) {
            trace->losses.push_back(err);
            trace->avg_losses.push_back(avg_loss);
            trace->weights_after.push_back(w);
        }
    }
    return model;
}

/// Weighted median of learner predictions with weights ln(1/beta): the first
/// prediction (ascending) whose cumulative weight reaches half the total.
/// An exact half tie lands on the lower prediction.
inline double adaboost_predict(const BoostEnsemble& model, const std::vector<double>& x) {
    const std::size_t t = model.learners.size();
    if (t == 0) throw EmptyEnsemble("predict on empty ensemble");
    std::vector<std::pair<double, double>> pred(t);  // (prediction, weight)
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        pred[i].first = model.learners[i].predict(x);
        pred[i].second = std::log(1.0 / model.betas[i]);
        total += pred[i].second;
    }
    std::stable_sort(pred.begin(), pred.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double cum = 0.0;
    for (const auto& [p, wt] : pred) {
        cum += wt;
        if (cum >= 0.5 * total) return p;
    }
    return pred.back().first;
}

struct TargetModels {
    BoostEnsemble dbp, map, sbp;
};

/// Three independent fits (DBP, MAP, SBP) with deterministic per-target
/// sub-seeds derived from `seed`.
inline TargetModels train_targets(const Matrix& X, const std::vector<double>& y_dbp,
                                  const std::vector<double>& y_map,
                                  const std::vector<double>& y_sbp, const BoostOptions& base) {
    TargetModels out;
    const char* names[3] = {"DBP", "MAP", "SBP"};
    const std::vector<double>* ys[3] = {&y_dbp, &y_map, &y_sbp};
    BoostEnsemble* models[3] = {&out.dbp, &out.map, &out.sbp};
    for (int i = 0; i < 3; ++i) {
        BoostOptions opt = base;
        opt.seed = Rng::child(base.seed, static_cast<std::uint64_t>(i)).next_u64();
        *models[i] = adaboost_fit(X, *ys[i], opt);
        models[i]->target = names[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: per-ensemble text block
//   target,T,depth,min_leaf,loss,seed,rng_algorithm
//   tree <node_count> followed by preorder node lines (s,feature,threshold or
//   l,value), one block per learner, then `betas` with the beta list.
// ---------------------------------------------------------------------------

namespace detail {

inline void dump_node(const RegressionTree& t, std::size_t i, std::ostream& out) {
    const TreeNode& n = t.nodes[i];
    if (n.leaf) {
        out << "l," << n.value << '\n';
    } else {
        out << "s," << n.feature << ',' << n.threshold << '\n';
        dump_node(t, static_cast<std::size_t>(n.left), out);
        dump_node(t, static_cast<std::size_t>(n.right), out);
    }
}

inline std::size_t parse_node(RegressionTree& t, std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedRecord("truncated tree dump");
    const std::size_t self = t.nodes.size();
    t.nodes.emplace_back();
    std::istringstream ss(line);
    std::string kind, a, b;
    std::getline(ss, kind, ',');
    if (kind == "l") {
        std::getline(ss, a, ',');
        t.nodes[self].value = std::stod(a);
    } else if (kind == "s") {
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        t.nodes[self].leaf = false;
        t.nodes[self].feature = std::stoul(a);
        t.nodes[self].threshold = std::stod(b);
        const std::size_t l = parse_node(t, in);
        const std::size_t r = parse_node(t, in);
        t.nodes[self].left = static_cast<std::int64_t>(l);
        t.nodes[self].right = static_cast<std::int64_t>(r);
    } else {
        throw MalformedRecord("bad tree node line '" + line + "'");
    }
    return self;
}

}  // namespace detail

inline void ensemble_save(const BoostEnsemble& m, std::ostream& out) {
    out.precision(17);
    out << m.target << ',' << m.options.rounds << ',' << m.options.max_depth << ','
        << m.options.min_leaf << ',' << to_string(m.options.loss) << ',' << m.options.seed << ','
        << m.rng_algorithm << '\n';
    for (const auto& t : m.learners) {
        out << "tree " << t.nodes.size() << '\n';
        detail::dump_node(t, 0, out);
    }
    out << "betas ";
    for (std::size_t i = 0; i < m.betas.size(); ++i) out << (i ? "," : "") << m.betas[i];
    out << '\n';
}

inline BoostEnsemble ensemble_load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedRecord("empty ensemble block");
    BoostEnsemble m;
    {
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, m.target, ',');
        std::getline(ss, tok, ',');
        m.options.rounds = std::stoul(tok);
        std::getline(ss, tok, ',');
        m.options.max_depth = std::stoul(tok);
        std::getline(ss, tok, ',');
        m.options.min_leaf = std::stoul(tok);
        std::getline(ss, tok, ',');
        m.options.loss = boost_loss_from_string(tok);
        std::getline(ss, tok, ',');
        m.options.seed = std::stoull(tok);
        std::getline(ss, m.rng_algorithm, ',');
    }
    while (in.peek() == 't') {
        if (!std::getline(in, line)) break;  // "tree N"
        RegressionTree t;
        t.max_depth = m.options.max_depth;
        t.min_leaf = m.options.min_leaf;
        detail::parse_node(t, in);
        m.learners.push_back(std::move(t));
    }
    if (!std::getline(in, line) || line.rfind("betas ", 0) != 0)
        throw MalformedRecord("missing betas line");
    std::istringstream ss(line.substr(6));
    std::string tok;
    while (std::getline(ss, tok, ',')) m.betas.push_back(std::stod(tok));
    if (m.betas.size() != m.learners.size())
        throw MalformedRecord("beta count != learner count");
    return m;
}

}  // namespace pulsegrid
