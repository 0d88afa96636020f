#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

struct PcaModel {
    std::size_t dim = 0;                           // L
    std::vector<double> mean;                      // length L
    std::vector<std::vector<double>> components;   // k orthonormal vectors, length L
    std::vector<double> eigenvalues;               // all L, non-increasing
    std::size_t k = 0;                             // retained count
    double energy_fraction = 0.0;                  // cumulative fraction at k
};

namespace detail {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, n*n).
/// On return `a` is (numerically) diagonal and `v` holds eigenvectors in
/// columns. Convergence: off-diagonal Frobenius norm below tol * initial norm.
inline void jacobi_eigen(std::vector<double>& a, std::vector<double>& v, std::size_t n,
                         double tol = 1e-12, std::size_t max_sweeps = 100) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
        return std::sqrt(2.0 * s);
    };
    double frob = 0.0;
    for (double x : a) frob += x * x;
    frob = std::sqrt(frob);
    if (frob == 0.0) return;

    // Entries below `skip` cannot push the off-diagonal norm above tol*frob
    // even if every one of them is left unrotated.
    const double skip = tol * frob / (2.0 * static_cast<double>(n));
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= tol * frob) return;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) <= skip) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i * n + p];
                    const double aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p * n + i];
                    const double aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i * n + p];
                    const double viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    if (off_norm() > tol * frob * 1e3)
        throw NumericalFailure("Jacobi eigensolver did not converge");
}

}  // namespace detail

/// Fit PCA on the rows of X: column-mean centering, sample covariance with
/// divisor n-1, cyclic Jacobi eigendecomposition, eigenpairs sorted by
/// descending eigenvalue. k is the minimal count whose cumulative eigenvalue
/// fraction reaches `retain`. Sign convention: each component's
/// largest-magnitude entry is positive.
inline PcaModel pca_fit(const std::vector<std::vector<double>>& X, double retain = 0.98) {
    const std::size_t n = X.size();
    if (n < 2) throw TooFewRows("PCA needs >= 2 rows");
    if (!(retain > 0.0 && retain <= 1.0)) throw ConfigError("retain must be in (0, 1]");
    const std::size_t L = X[0].size();
    for (const auto& row : X)
        if (row.size() != L) throw DimensionMismatch("ragged feature matrix");

    PcaModel m;
    m.dim = L;
    m.mean.assign(L, 0.0);
    for (const auto& row : X)
        for (std::size_t j = 0; j < L; ++j) m.mean[j] += row[j];
    for (auto& v : m.mean) v /= static_cast<double>(n);

    std::vector<double> cov(L * L, 0.0);
    {
        std::vector<double> centered(L);
        for (const auto& row : X) {
            for (std::size_t j = 0; j < L; ++j) centered[j] = row[j] - m.mean[j];
            for (std::size_t a = 0; a < L; ++a) {
                const double ca = centered[a];
                if (ca == 0.0) continue;
                double* dst = cov.data() + a * L;
                for (std::size_t b = a; b < L; ++b) dst[b] += ca * centered[b];
            }
        }
        const double denom = static_cast<double>(n - 1);
        for (std::size_t a = 0; a < L; ++a)
            for (std::size_t b = a; b < L; ++b) {
                cov[a * L + b] /= denom;
                cov[b * L + a] = cov[a * L + b];
            }
    }

    std::vector<double> vecs;
    detail::jacobi_eigen(cov, vecs, L);

    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cov[a * L + a] > cov[b * L + b]; });

    m.eigenvalues.resize(L);
    double total = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        m.eigenvalues[j] = std::max(0.0, cov[order[j] * L + order[j]]);
        total += m.eigenvalues[j];
    }

    double cum = 0.0;
    m.k = L;
    for (std::size_t j = 0; j < L; ++j) {
        cum += m.eigenvalues[j];
        if (total == 0.0 || cum >= retain * total) {
            m.k = j + 1;
            m.energy_fraction = total == 0.0 ? 1.0 : cum / total;
            break;
        }
    }

    m.components.resize(m.k);
    for (std::size_t j = 0; j < m.k; ++j) {
        auto& comp = m.components[j];
        comp.resize(L);
        for (std::size_t i = 0; i < L; ++i) comp[i] = vecs[i * L + order[j]];
        std::size_t arg = 0;
        for (std::size_t i = 1; i < L; ++i)
            if (std::abs(comp[i]) > std::abs(comp[arg])) arg = i;
        if (comp[arg] < 0.0)
            for (auto& x : comp) x = -x;
    }
    return m;
}

inline std::vector<double> pca_transform(const PcaModel& model, const std::vector<double>& x) {
    if (x.size() != model.dim) throw DimensionMismatch("expected length " + std::to_string(model.dim));
    std::vector<double> y(model.k, 0.0);
    for (std::size_t j = 0; j < model.k; ++j) {
        double dot = 0.0;
        const auto& comp = model.components[j];
        for (std::size_t i = 0; i < model.dim; ++i) dot += (x[i] - model.mean[i]) * comp[i];
        y[j] = dot;
    }
    return y;
}

inline std::vector<std::vector<double>> pca_transform_all(const PcaModel& model,
                                                          const std::vector<std::vector<double>>& X) {
    std::vector<std::vector<double>> Y;
    Y.reserve(X.size());
    for (const auto& row : X) Y.push_back(pca_transform(model, row));
    return Y;
}

// Serialization: header `L,k`, then mean row, k component rows, eigenvalue row
// (all comma-separated decimals).

inline void pca_save(const PcaModel& m, std::ostream& out) {
    out.precision(17);
    out << m.dim << ',' << m.k << '\n';
    auto row = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
        out << '\n';
    };
    row(m.mean);
    for (const auto& c : m.components) row(c);
    row(m.eigenvalues);
}

inline PcaModel pca_load(std::istream& in) {
    auto read_row = [&](std::size_t expect) {
        std::string line;
        if (!std::getline(in, line)) throw MalformedRecord("truncated PCA model");
        std::vector<double> v;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        if (expect && v.size() != expect) throw MalformedRecord("bad PCA model row length");
        return v;
    };
    std::string header;
    if (!std::getline(in, header)) throw MalformedRecord("empty PCA model");
    PcaModel m;
    {
        std::istringstream ss(header);
        std::string tok;
        std::getline(ss, tok, ',');
        m.dim = std::stoul(tok);
        std::getline(ss, tok, ',');
        m.k = std::stoul(tok);
    }
    m.mean = read_row(m.dim);
    m.components.resize(m.k);
    for (auto& c : m.components) c = read_row(m.dim);
    m.eigenvalues = read_row(0);
    double total = 0.0, cum = 0.0;
    for (double e : m.eigenvalues) total += e;
    for (std::size_t j = 0; j < m.k && j < m.eigenvalues.size(); ++j) cum += m.eigenvalues[j];
    m.energy_fraction = total > 0.0 ? cum / total : 1.0;
    return m;
}

}  // namespace pulsegrid
