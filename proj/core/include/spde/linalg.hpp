#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace spde {

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

// Compressed sparse row matrix. Assembly goes through from_triplets, which sums
// duplicate coordinates, sorts columns within each row, and drops entries whose
// summed value is exactly zero. Matvec accumulates left to right in ascending
// column order within each row, so results are bit-reproducible.
class SparseMatrix {
public:
    SparseMatrix() = default;

    static SparseMatrix from_triplets(int n_rows, int n_cols, std::vector<Triplet> entries);
    static SparseMatrix identity(int n);

    int rows() const { return n_rows_; }
    int cols() const { return n_cols_; }
    int nnz() const { return static_cast<int>(values_.size()); }

    std::span<const int> row_offsets() const { return row_offsets_; }
    std::span<const int> col_indices() const { return col_indices_; }
    std::span<const double> values() const { return values_; }
    // Mutable access to stored values for pattern-preserving refills (the Newton
    // Jacobian rewrites values in place every iteration).
    std::span<double> values_mut() { return values_; }

    double coeff(int row, int col) const;

    void multiply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> multiply(std::span<const double> x) const;

    SparseMatrix transposed() const;
    SparseMatrix scaled(double factor) const;
    // alpha*A + beta*B for same-shape matrices.
    static SparseMatrix weighted_sum(const SparseMatrix& a, double alpha,
                                     const SparseMatrix& b, double beta);
    // Submatrix with rows and columns restricted to the given index lists,
    // renumbered in list order.
    SparseMatrix extract(std::span<const int> row_ids, std::span<const int> col_ids) const;

    double max_abs() const;

private:
    int n_rows_ = 0;
    int n_cols_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

struct SolveSettings {
    enum class Method { direct_lu, krylov_nonsymmetric };
    Method method = Method::direct_lu;
    double rel_tol = 1e-12;
    int max_iterations = 2000;
};

// One-shot sparse LU (direct route). Factorization happens in the constructor;
// solve() applies one round of iterative refinement.
class LuSolver {
public:
    explicit LuSolver(const SparseMatrix& a);
    ~LuSolver();
    LuSolver(LuSolver&&) noexcept;
    LuSolver& operator=(LuSolver&&) noexcept;
    LuSolver(const LuSolver&) = delete;
    LuSolver& operator=(const LuSolver&) = delete;

    std::vector<double> solve(std::span<const double> b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// LU with the symbolic analysis done once on a fixed sparsity pattern, so a
// matrix with new values but the same pattern refactors cheaply. Used by the
// Newton loop, where the Jacobian changes every iteration but never its pattern.
class RefactorableLu {
public:
    explicit RefactorableLu(const SparseMatrix& pattern);
    ~RefactorableLu();
    RefactorableLu(RefactorableLu&&) noexcept;
    RefactorableLu& operator=(RefactorableLu&&) noexcept;
    RefactorableLu(const RefactorableLu&) = delete;
    RefactorableLu& operator=(const RefactorableLu&) = delete;

    void refactor(const SparseMatrix& same_pattern);
    std::vector<double> solve(std::span<const double> b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Apply M^{-1} for right preconditioning; empty function means none.
using Preconditioner = std::function<std::vector<double>(std::span<const double>)>;

struct KrylovStats {
    int iterations = 0;
    double final_relative_residual = 0.0;
};

// Hand-rolled BiCGSTAB on the CSR matvec only (independent from the LU route).
// Throws NumericalError on stagnation or iteration exhaustion.
std::vector<double> bicgstab(const SparseMatrix& a, std::span<const double> b,
                             double rel_tol, int max_iterations,
                             const Preconditioner& precond = {}, KrylovStats* stats = nullptr);

// Route a single solve through the configured method.
std::vector<double> solve_linear(const SparseMatrix& a, std::span<const double> b,
                                 const SolveSettings& settings);

// Dense-vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double max_abs(std::span<const double> a);
bool all_finite(std::span<const double> a);

} // namespace spde
