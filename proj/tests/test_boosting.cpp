#include "pulsegrid/boosting.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "pulsegrid/rng.hpp"

using namespace pulsegrid;

namespace {

Matrix column(const std::vector<double>& xs) {
    Matrix X;
    for (double x : xs) X.push_back({x});
    return X;
}

BoostEnsemble leaf_ensemble(const std::vector<double>& predictions,
                            const std::vector<double>& median_weights) {
    BoostEnsemble m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        RegressionTree t;
        t.nodes.push_back(TreeNode{});
        t.nodes[0].value = predictions[i];
        m.learners.push_back(t);
        m.betas.push_back(std::exp(-median_weights[i]));  // ln(1/beta) == weight
    }
    return m;
}

Matrix random_matrix(std::size_t n, std::size_t k, Rng& rng) {
    Matrix X(n, std::vector<double>(k));
    for (auto& r : X)
        for (auto& v : r) v = rng.uniform(-1.0, 1.0);
    return X;
}

}  // namespace

TEST_CASE("constant target gives a single leaf") {
    const Matrix X = column({1, 2, 3, 4});
    const std::vector<double> y(4, 7.5), w(4, 0.25);
    const RegressionTree t = tree_fit(X, y, w, 4, 1);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].leaf);
    CHECK(t.predict({2.2}) == 7.5);
}

TEST_CASE("depth 0 yields the weighted mean") {
    const Matrix X = column({1, 2, 3});
    const std::vector<double> y = {0.0, 10.0, 20.0};
    const std::vector<double> w = {0.5, 0.25, 0.25};
    const RegressionTree t = tree_fit(X, y, w, 0, 1);
    CHECK(t.nodes.size() == 1);
    CHECK(t.predict({99.0}) == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("step data splits at the brute-force-optimal threshold") {
    const Matrix X = column({1, 2, 3, 4});
    const std::vector<double> y = {0, 0, 10, 10};
    const std::vector<double> w(4, 0.25);

    // brute force over the 3 candidate thresholds
    double best_sse = 1e300, best_thr = 0.0;
    for (double thr : {1.5, 2.5, 3.5}) {
        double lw = 0, lwy = 0, rw = 0, rwy = 0;
        for (int i = 0; i < 4; ++i)
            if (X[i][0] <= thr) {
                lw += w[i];
                lwy += w[i] * y[i];
            } else {
                rw += w[i];
                rwy += w[i] * y[i];
            }
        double sse = 0;
        for (int i = 0; i < 4; ++i) {
            const double mean = X[i][0] <= thr ? lwy / lw : rwy / rw;
            sse += w[i] * (y[i] - mean) * (y[i] - mean);
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_thr = thr;
        }
    }
    CHECK(best_thr == 2.5);

    const RegressionTree t = tree_fit(X, y, w, 1, 1);
    REQUIRE(!t.nodes[0].leaf);
    CHECK(t.nodes[0].threshold == doctest::Approx(best_thr));
    CHECK(t.nodes[0].threshold > 2.0);
    CHECK(t.nodes[0].threshold <= 3.0);
    CHECK(t.predict({1.0}) == 0.0);
    CHECK(t.predict({4.0}) == 10.0);
}

TEST_CASE("split ties break toward the lowest feature index") {
    // identical columns: both features offer the same best split
    Matrix X = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
    const std::vector<double> y = {0, 0, 10, 10};
    const std::vector<double> w(4, 0.25);
    const RegressionTree t = tree_fit(X, y, w, 1, 1);
    REQUIRE(!t.nodes[0].leaf);
    CHECK(t.nodes[0].feature == 0);
}

TEST_CASE("hand-traced Drucker round with a forced resample") {
    // originals x = 1..4, y = [0, 1, 3, 10]; forced draw [0,0,3,3] trains the
    // tree on {(1,0),(4,10)} duplicated, so it predicts 0 below 2.5, 10 above
    const Matrix X = column({1, 2, 3, 4});
    const std::vector<double> y = {0, 1, 3, 10};
    BoostOptions opt;
    opt.rounds = 1;
    opt.max_depth = 1;
    opt.min_leaf = 1;
    const RoundSampler forced = [](const std::vector<double>&, std::size_t,
                                   Rng&) -> std::vector<std::size_t> {
        return {0, 0, 3, 3};
    };
    BoostTrace trace;
    const BoostEnsemble m = adaboost_fit(X, y, opt, forced, &trace);

    REQUIRE(m.learners.size() == 1);
    // errors on the full set: e = [0, 1, 7, 0], D = 7, l = e/7
    // average loss = (0 + 1/7 + 1 + 0)/4 = 2/7, beta = (2/7)/(5/7) = 0.4
    REQUIRE(trace.avg_losses.size() == 1);
    CHECK(std::abs(trace.avg_losses[0] - 2.0 / 7.0) < 1e-12);
    CHECK(std::abs(m.betas[0] - 0.4) < 1e-12);
    const std::vector<double> l = {0.0, 1.0 / 7.0, 1.0, 0.0};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(trace.losses[0][i] - l[i]) < 1e-12);

    // w_i <- 0.25 * beta^(1 - l_i), then renormalize
    double raw[4], sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        raw[i] = 0.25 * std::pow(0.4, 1.0 - l[i]);
        sum += raw[i];
    }
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(trace.weights_after[0][i] - raw[i] / sum) < 1e-12);
}

TEST_CASE("constant target: exact first tree, single perfect learner") {
    const Matrix X = column({1, 2, 3, 4, 5});
    const std::vector<double> y(5, 42.0);
    BoostOptions opt;
    opt.rounds = 50;
    opt.seed = 3;
    const BoostEnsemble m = adaboost_fit(X, y, opt);
    CHECK(m.learners.size() == 1);
    CHECK(m.betas[0] == kPerfectLearnerBeta);
    CHECK(adaboost_predict(m, {3.3}) == 42.0);
}

TEST_CASE("single-round ensemble equals its single tree") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + rng.uniform_index(40);
        const Matrix X = random_matrix(n, 3, rng);
        std::vector<double> y(n);
        for (auto& v : y) v = rng.uniform(0.0, 10.0);
        BoostOptions opt;
        opt.rounds = 1;
        opt.max_depth = 3;
        opt.min_leaf = 2;
        opt.seed = rng.next_u64();
        BoostEnsemble m;
        try {
            m = adaboost_fit(X, y, opt);
        } catch (const NoLearnerAccepted&) {
            continue;  // random noise targets can reject the first round
        }
        REQUIRE(m.learners.size() == 1);
        for (int probe = 0; probe < 5; ++probe) {
            const std::vector<double> x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                           rng.uniform(-1.0, 1.0)};
            CHECK(adaboost_predict(m, x) == m.learners[0].predict(x));
        }
    }
}

TEST_CASE("weighted median arithmetic and tie-breaking") {
    const BoostEnsemble heavy = leaf_ensemble({1, 2, 3}, {1, 1, 5});
    CHECK(adaboost_predict(heavy, {0.0}) == 3.0);  // cumulative 1,2,7 vs half 3.5

    const BoostEnsemble tie = leaf_ensemble({1, 3}, {1, 1});
    CHECK(adaboost_predict(tie, {0.0}) == 1.0);  // exact half resolves low

    const BoostEnsemble one = leaf_ensemble({4.2}, {0.7});
    CHECK(adaboost_predict(one, {0.0}) == 4.2);

    CHECK_THROWS_AS(adaboost_predict(BoostEnsemble{}, {0.0}), EmptyEnsemble);
}

TEST_CASE("weighted median invariants on random ensembles") {
    Rng rng(91);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t t = 1 + rng.uniform_index(8);
        std::vector<double> preds(t), wts(t);
        for (auto& p : preds) p = rng.uniform(-10.0, 10.0);
        for (auto& w : wts) w = rng.uniform(0.01, 3.0);
        const BoostEnsemble m = leaf_ensemble(preds, wts);
        const double out = adaboost_predict(m, {0.0});

        double mn = preds[0], mx = preds[0];
        for (double p : preds) {
            mn = std::min(mn, p);
            mx = std::max(mx, p);
        }
        CHECK(out >= mn);
        CHECK(out <= mx);

        // scaling all weights leaves the prediction unchanged
        std::vector<double> scaled = wts;
        const double c = rng.uniform(0.1, 5.0);
        for (auto& w : scaled) w *= c;
        CHECK(adaboost_predict(leaf_ensemble(preds, scaled), {0.0}) == out);

        // monotone: raising one learner's prediction never lowers the median
        std::vector<double> bumped = preds;
        bumped[rng.uniform_index(t)] += rng.uniform(0.0, 5.0);
        CHECK(adaboost_predict(leaf_ensemble(bumped, wts), {0.0}) >= out);
    }
}

TEST_CASE("boosting keeps weights a probability distribution") {
    Rng rng(101);
    const std::size_t n = 40;
    const Matrix X = random_matrix(n, 2, rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * X[i][0] - X[i][1] + 0.1 * rng.normal();
    BoostOptions opt;
    opt.rounds = 20;
    opt.seed = 5;
    BoostTrace trace;
    const BoostEnsemble m = adaboost_fit(X, y, opt, {}, &trace);
    REQUIRE(!m.learners.empty());
    for (const auto& w : trace.weights_after) {
        double sum = 0.0;
        for (double v : w) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    for (std::size_t i = 0; i < trace.avg_losses.size(); ++i) {
        CHECK(trace.avg_losses[i] < 0.5);
        CHECK(m.betas[i] > 0.0);
        CHECK(m.betas[i] < 1.0);
    }
}

TEST_CASE("train_targets is deterministic and beats the constant baseline") {
    Rng rng(111);
    const std::size_t n = 120;
    const Matrix X = random_matrix(n, 4, rng);
    std::vector<double> dbp(n), map(n), sbp(n);
    for (std::size_t i = 0; i < n; ++i) {
        dbp[i] = 70.0 + 20.0 * X[i][0] + 5.0 * X[i][1] * X[i][2];
        sbp[i] = dbp[i] + 40.0 + 10.0 * X[i][3];
        map[i] = (2.0 * dbp[i] + sbp[i]) / 3.0;
    }
    BoostOptions opt;
    opt.rounds = 30;
    opt.seed = 9;
    const TargetModels a = train_targets(X, dbp, map, sbp, opt);
    const TargetModels b = train_targets(X, dbp, map, sbp, opt);
    CHECK(a.dbp.betas == b.dbp.betas);
    CHECK(a.sbp.betas == b.sbp.betas);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(adaboost_predict(a.map, X[i]) == adaboost_predict(b.map, X[i]));

    // training MAE must beat the depth-0 single-leaf baseline
    auto mae = [&](const BoostEnsemble& m, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::abs(adaboost_predict(m, X[i]) - y[i]);
        return s / static_cast<double>(n);
    };
    auto baseline_mae = [&](const std::vector<double>& y) {
        double mean = 0.0;
        for (double v : y) mean += v / static_cast<double>(n);
        double s = 0.0;
        for (double v : y) s += std::abs(v - mean);
        return s / static_cast<double>(n);
    };
    CHECK(mae(a.dbp, dbp) < baseline_mae(dbp));
    CHECK(mae(a.map, map) < baseline_mae(map));
    CHECK(mae(a.sbp, sbp) < baseline_mae(sbp));
}

TEST_CASE("permutation equivariance with re-indexed resampling draws") {
    Rng rng(131);
    const std::size_t n = 30;
    const Matrix X = random_matrix(n, 3, rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 5.0 * X[i][0] - 2.0 * X[i][2];

    BoostOptions opt;
    opt.rounds = 5;
    opt.seed = 17;

    // record the default sampler's draws on the original ordering
    std::vector<std::vector<std::size_t>> draws;
    const RoundSampler recorder = [&](const std::vector<double>& w, std::size_t,
                                      Rng& r) -> std::vector<std::size_t> {
        draws.push_back(weighted_bootstrap(w, r));
        return draws.back();
    };
    const BoostEnsemble base = adaboost_fit(X, y, opt, recorder);

    // permute rows and replay the same draws through the permutation
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng(19).shuffle(perm);
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    Matrix Xp(n);
    std::vector<double> yp(n);
    for (std::size_t i = 0; i < n; ++i) {
        Xp[inv[i]] = X[i];
        yp[inv[i]] = y[i];
    }
    std::size_t round = 0;
    const RoundSampler replay = [&](const std::vector<double>&, std::size_t,
                                    Rng&) -> std::vector<std::size_t> {
        std::vector<std::size_t> out;
        for (std::size_t r : draws[round]) out.push_back(inv[r]);
        ++round;
        return out;
    };
    const BoostEnsemble permuted = adaboost_fit(Xp, yp, opt, replay);

    REQUIRE(base.learners.size() == permuted.learners.size());
    for (std::size_t i = 0; i < n; ++i)
        CHECK(adaboost_predict(base, X[i]) ==
              doctest::Approx(adaboost_predict(permuted, X[i])).epsilon(1e-12));
}

TEST_CASE("ensemble serialization round trip") {
    Rng rng(141);
    const Matrix X = random_matrix(25, 3, rng);
    std::vector<double> y(25);
    for (std::size_t i = 0; i < 25; ++i) y[i] = 2.0 * X[i][1] + X[i][0];
    BoostOptions opt;
    opt.rounds = 8;
    opt.seed = 23;
    BoostEnsemble m = adaboost_fit(X, y, opt);
    m.target = "DBP";
    std::stringstream ss;
    ensemble_save(m, ss);
    const BoostEnsemble l = ensemble_load(ss);
    CHECK(l.target == "DBP");
    CHECK(l.betas == m.betas);
    CHECK(l.rng_algorithm == m.rng_algorithm);
    REQUIRE(l.learners.size() == m.learners.size());
    for (std::size_t i = 0; i < 10; ++i) {
        const std::vector<double> x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                       rng.uniform(-1.0, 1.0)};
        CHECK(adaboost_predict(l, x) == adaboost_predict(m, x));
    }
}

TEST_CASE("empty and degenerate inputs raise the named errors") {
    CHECK_THROWS_AS(tree_fit({}, {}, {}, 2, 1), EmptyTrainingSet);
    CHECK_THROWS_AS(adaboost_fit(column({1}), {1.0}, BoostOptions{}), EmptyTrainingSet);
}
