#ifndef VET_CLASSICAL_HPP
#define VET_CLASSICAL_HPP

#include <cstddef>
#include <vector>

#include "vet/volume.hpp"

namespace vet {

// Non-negative flow/vascular signal strength per (x, z).
using FlowFrame = Image2D;

// Inter-repeat autocorrelation C = X X^H / P. Real amplitude data makes it
// symmetric; the Hermitian wording is kept so a complex extension does not
// change any contract.
struct AutocorrMatrix {
    std::size_t n = 0;
    std::vector<double> entries;  // row-major n x n
    std::size_t pixel_count = 0;

    double& at(std::size_t i, std::size_t j) { return entries[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

struct EigDecomposition {
    std::vector<double> eigenvalues;    // descending
    std::vector<double> eigenvectors;   // row-major n x n, column j <-> eigenvalue j
    std::size_t n = 0;

    double vec(std::size_t row, std::size_t col) const { return eigenvectors[row * n + col]; }
};

// Repeats-by-pixels data matrix used by the eigendecomposition filter.
struct DataMatrix {
    std::size_t rows = 0;  // repeats
    std::size_t cols = 0;  // pixels
    std::vector<double> values;

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Mean absolute consecutive-frame difference: (1/(NR-1)) sum |A_{i+1} - A_i|.
FlowFrame sv_octa(const BFrameEnsemble& ensemble);

// Cyclic Jacobi eigensolver for the small symmetric autocorrelation matrix
// (n <= 64). Eigenvalues sorted descending, eigenvectors orthonormal columns.
EigDecomposition eigh_hermitian(const AutocorrMatrix& m);

DataMatrix stack_ensemble(const BFrameEnsemble& ensemble, bool zero_mean_rows = false);
AutocorrMatrix autocorrelation(const DataMatrix& x);

// Applies [I - sum_{i<k} e_i e_i^H] X for a given eigenbasis.
DataMatrix project_out(const DataMatrix& x, const EigDecomposition& eig, std::size_t k);

// Removes the k dominant eigencomponents of x's own autocorrelation:
// X_v = [I - sum_{i<k} e_i e_i^H] X.
DataMatrix ed_filter(const DataMatrix& x, std::size_t k);

// Full eigendecomposition clutter filter; the filtered rows collapse to one
// frame by per-pixel RMS over repeats.
FlowFrame ed_octa(const BFrameEnsemble& ensemble, std::size_t k = 1, bool zero_mean_rows = false);

}  // namespace vet

#endif
