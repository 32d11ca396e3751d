#include "vet/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vet/common.hpp"

namespace vet {

FlowFrame sv_octa(const BFrameEnsemble& ensemble) {
    const std::size_t nr = ensemble.nr();
    if (nr < 2) throw ArgumentError("sv_octa: need at least 2 repeats");
    const std::size_t nx = ensemble.nx(), nz = ensemble.nz();
    for (const auto& f : ensemble.frames)
        if (f.nx != nx || f.nz != nz) throw ArgumentError("sv_octa: frame shapes differ");

    FlowFrame flow(nx, nz);
    const double inv = 1.0 / static_cast<double>(nr - 1);
    for (std::size_t p = 0; p < nx * nz; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < nr; ++i)
            acc += std::abs(static_cast<double>(ensemble.frames[i + 1].data[p]) -
                            static_cast<double>(ensemble.frames[i].data[p]));
        flow.data[p] = static_cast<float>(acc * inv);
    }
    return flow;
}

EigDecomposition eigh_hermitian(const AutocorrMatrix& m) {
    const std::size_t n = m.n;
    if (n == 0 || n > 64) throw ArgumentError("eigh_hermitian: order must be in [1, 64]");
    if (m.entries.size() != n * n) throw ArgumentError("eigh_hermitian: entry count mismatch");

    double max_abs = 0.0;
    for (double v : m.entries) max_abs = std::max(max_abs, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m.at(i, j) - m.at(j, i)) > 1e-10 * std::max(1.0, max_abs))
                throw ArgumentError("eigh_hermitian: matrix is not symmetric within tolerance");

    std::vector<double> a(m.entries);
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double norm_f = 0.0;
    for (double x : a) norm_f += x * x;
    norm_f = std::sqrt(norm_f);

    const auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a[i * n + j] * a[i * n + j];
        return std::sqrt(s);
    };

    // converge on the off-diagonal Frobenius norm, scaled so large matrices
    // remain reachable in double precision
    const double target = 1e-12 * std::max(norm_f, 1.0);
    const int max_sweeps = 100;
    int sweep = 0;
    while (off_norm() > target) {
        if (++sweep > max_sweeps) throw NumericError("eigh_hermitian: Jacobi failed to converge");
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p], aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // A <- J^T A J with J the (p,q) rotation
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i * n + p], aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a[p * n + j], aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i * n + p], viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
    }

    EigDecomposition out;
    out.n = n;
    out.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.eigenvalues[i] = a[i * n + i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return out.eigenvalues[l] > out.eigenvalues[r]; });

    EigDecomposition sorted;
    sorted.n = n;
    sorted.eigenvalues.resize(n);
    sorted.eigenvectors.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        sorted.eigenvalues[j] = out.eigenvalues[order[j]];
        for (std::size_t i = 0; i < n; ++i) sorted.eigenvectors[i * n + j] = v[i * n + order[j]];
    }
    return sorted;
}

DataMatrix stack_ensemble(const BFrameEnsemble& ensemble, bool zero_mean_rows) {
    const std::size_t nr = ensemble.nr();
    if (nr < 1) throw ArgumentError("stack_ensemble: empty ensemble");
    const std::size_t p = ensemble.nx() * ensemble.nz();
    DataMatrix x;
    x.rows = nr;
    x.cols = p;
    x.values.resize(nr * p);
    for (std::size_t r = 0; r < nr; ++r) {
        const auto& f = ensemble.frames[r];
        if (f.data.size() != p) throw ArgumentError("stack_ensemble: frame shapes differ");
        double mean = 0.0;
        if (zero_mean_rows) {
            for (float val : f.data) mean += val;
            mean /= static_cast<double>(p);
        }
        for (std::size_t c = 0; c < p; ++c) x.values[r * p + c] = static_cast<double>(f.data[c]) - mean;
    }
    return x;
}

AutocorrMatrix autocorrelation(const DataMatrix& x) {
    AutocorrMatrix m;
    m.n = x.rows;
    m.pixel_count = x.cols;
    m.entries.assign(x.rows * x.rows, 0.0);
    const double inv = 1.0 / static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = i; j < x.rows; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) acc += x.at(i, c) * x.at(j, c);
            m.at(i, j) = m.at(j, i) = acc * inv;
        }
    return m;
}

DataMatrix project_out(const DataMatrix& x, const EigDecomposition& eig, std::size_t k) {
    const std::size_t n = x.rows;
    if (eig.n != n) throw ArgumentError("project_out: eigenbasis order mismatch");
    if (k < 1 || k >= n) throw ArgumentError("project_out: k must satisfy 1 <= k < repeats");

    // X_v = X - sum_{i<k} e_i (e_i^T X); the subtraction form avoids building
    // the n x n projector explicitly
    DataMatrix xv = x;
    std::vector<double> proj(x.cols);
    for (std::size_t i = 0; i < k; ++i) {
        std::fill(proj.begin(), proj.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double e = eig.vec(r, i);
            for (std::size_t col = 0; col < x.cols; ++col) proj[col] += e * x.at(r, col);
        }
        for (std::size_t r = 0; r < n; ++r) {
            const double e = eig.vec(r, i);
            for (std::size_t col = 0; col < x.cols; ++col) xv.at(r, col) -= e * proj[col];
        }
    }
    return xv;
}

DataMatrix ed_filter(const DataMatrix& x, std::size_t k) {
    if (x.rows < 2) throw ArgumentError("ed_filter: need at least 2 repeats");
    if (k < 1 || k >= x.rows) throw ArgumentError("ed_filter: k must satisfy 1 <= k < repeats");
    return project_out(x, eigh_hermitian(autocorrelation(x)), k);
}

FlowFrame ed_octa(const BFrameEnsemble& ensemble, std::size_t k, bool zero_mean_rows) {
    if (ensemble.nr() < 2) throw ArgumentError("ed_octa: need at least 2 repeats");
    if (k >= ensemble.nr()) throw ArgumentError("ed_octa: k must be < repeat count");

    const DataMatrix x = stack_ensemble(ensemble, zero_mean_rows);
    const DataMatrix xv = ed_filter(x, k);

    FlowFrame flow(ensemble.nx(), ensemble.nz());
    const double inv = 1.0 / static_cast<double>(xv.rows);
    for (std::size_t c = 0; c < xv.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < xv.rows; ++r) acc += xv.at(r, c) * xv.at(r, c);
        flow.data[c] = static_cast<float>(std::sqrt(acc * inv));
    }
    return flow;
}

}  // namespace vet
