#include "spde/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "spde/errors.hpp"

namespace spde {

SparseMatrix SparseMatrix::from_triplets(int n_rows, int n_cols, std::vector<Triplet> entries) {
    if (n_rows < 0 || n_cols < 0)
        throw ConfigError("from_triplets: negative dimensions");
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols) {
            std::ostringstream msg;
            msg << "from_triplets: entry (" << t.row << ", " << t.col << ") outside "
                << n_rows << " x " << n_cols;
            throw ConfigError(msg.str());
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_offsets_.assign(static_cast<size_t>(n_rows) + 1, 0);
    m.col_indices_.reserve(entries.size());
    m.values_.reserve(entries.size());

    size_t i = 0;
    for (int row = 0; row < n_rows; ++row) {
        while (i < entries.size() && entries[i].row == row) {
            const int col = entries[i].col;
            double sum = 0.0;
            while (i < entries.size() && entries[i].row == row && entries[i].col == col) {
                sum += entries[i].value;
                ++i;
            }
            if (sum != 0.0) {
                m.col_indices_.push_back(col);
                m.values_.push_back(sum);
            }
        }
        m.row_offsets_[static_cast<size_t>(row) + 1] = static_cast<int>(m.values_.size());
    }
    return m;
}

SparseMatrix SparseMatrix::identity(int n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(int row, int col) const {
    const int begin = row_offsets_[static_cast<size_t>(row)];
    const int end = row_offsets_[static_cast<size_t>(row) + 1];
    const auto first = col_indices_.begin() + begin;
    const auto last = col_indices_.begin() + end;
    const auto it = std::lower_bound(first, last, col);
    if (it != last && *it == col)
        return values_[static_cast<size_t>(it - col_indices_.begin())];
    return 0.0;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<int>(x.size()) != n_cols_ || static_cast<int>(y.size()) != n_rows_)
        throw ConfigError("multiply: dimension mismatch");
    for (int row = 0; row < n_rows_; ++row) {
        double acc = 0.0;
        for (int k = row_offsets_[static_cast<size_t>(row)];
             k < row_offsets_[static_cast<size_t>(row) + 1]; ++k) {
            acc += values_[static_cast<size_t>(k)] * x[static_cast<size_t>(col_indices_[static_cast<size_t>(k)])];
        }
        y[static_cast<size_t>(row)] = acc;
    }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(static_cast<size_t>(n_rows_));
    multiply(x, y);
    return y;
}

SparseMatrix SparseMatrix::transposed() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (int row = 0; row < n_rows_; ++row)
        for (int k = row_offsets_[static_cast<size_t>(row)];
             k < row_offsets_[static_cast<size_t>(row) + 1]; ++k)
            t.push_back({col_indices_[static_cast<size_t>(k)], row, values_[static_cast<size_t>(k)]});
    return from_triplets(n_cols_, n_rows_, std::move(t));
}

SparseMatrix SparseMatrix::scaled(double factor) const {
    SparseMatrix m = *this;
    for (auto& v : m.values_)
        v *= factor;
    return m;
}

SparseMatrix SparseMatrix::weighted_sum(const SparseMatrix& a, double alpha,
                                        const SparseMatrix& b, double beta) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError("weighted_sum: shape mismatch");
    std::vector<Triplet> t;
    t.reserve(a.values_.size() + b.values_.size());
    for (int row = 0; row < a.n_rows_; ++row)
        for (int k = a.row_offsets_[static_cast<size_t>(row)];
             k < a.row_offsets_[static_cast<size_t>(row) + 1]; ++k)
            t.push_back({row, a.col_indices_[static_cast<size_t>(k)],
                         alpha * a.values_[static_cast<size_t>(k)]});
    for (int row = 0; row < b.n_rows_; ++row)
        for (int k = b.row_offsets_[static_cast<size_t>(row)];
             k < b.row_offsets_[static_cast<size_t>(row) + 1]; ++k)
            t.push_back({row, b.col_indices_[static_cast<size_t>(k)],
                         beta * b.values_[static_cast<size_t>(k)]});
    return from_triplets(a.n_rows_, a.n_cols_, std::move(t));
}

SparseMatrix SparseMatrix::extract(std::span<const int> row_ids, std::span<const int> col_ids) const {
    std::vector<int> col_map(static_cast<size_t>(n_cols_), -1);
    for (size_t j = 0; j < col_ids.size(); ++j)
        col_map[static_cast<size_t>(col_ids[j])] = static_cast<int>(j);

    std::vector<Triplet> t;
    for (size_t i = 0; i < row_ids.size(); ++i) {
        const int row = row_ids[i];
        for (int k = row_offsets_[static_cast<size_t>(row)];
             k < row_offsets_[static_cast<size_t>(row) + 1]; ++k) {
            const int mapped = col_map[static_cast<size_t>(col_indices_[static_cast<size_t>(k)])];
            if (mapped >= 0)
                t.push_back({static_cast<int>(i), mapped, values_[static_cast<size_t>(k)]});
        }
    }
    return from_triplets(static_cast<int>(row_ids.size()), static_cast<int>(col_ids.size()),
                         std::move(t));
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : values_)
        m = std::max(m, std::abs(v));
    return m;
}

namespace {

using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

EigenSparse to_eigen(const SparseMatrix& a) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(a.nnz()));
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    for (int row = 0; row < a.rows(); ++row)
        for (int k = offsets[static_cast<size_t>(row)]; k < offsets[static_cast<size_t>(row) + 1]; ++k)
            t.emplace_back(row, cols[static_cast<size_t>(k)], vals[static_cast<size_t>(k)]);
    EigenSparse m(a.rows(), a.cols());
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

} // namespace

struct LuSolver::Impl {
    EigenSparse matrix;
    Eigen::SparseLU<EigenSparse> lu;
};

LuSolver::LuSolver(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
    if (a.rows() != a.cols())
        throw ConfigError("LuSolver: matrix must be square");
    impl_->matrix = to_eigen(a);
    impl_->lu.compute(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success)
        throw NumericalError("LuSolver: factorization failed (matrix singular or ill-conditioned)");
}

LuSolver::~LuSolver() = default;
LuSolver::LuSolver(LuSolver&&) noexcept = default;
LuSolver& LuSolver::operator=(LuSolver&&) noexcept = default;

std::vector<double> LuSolver::solve(std::span<const double> b) const {
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    // One refinement sweep tightens the backward error at negligible cost.
    Eigen::VectorXd r = rhs - impl_->matrix * x;
    x += impl_->lu.solve(r);
    std::vector<double> out(b.size());
    Eigen::Map<Eigen::VectorXd>(out.data(), x.size()) = x;
    if (!all_finite(out))
        throw NumericalError("LuSolver: non-finite solution");
    return out;
}

struct RefactorableLu::Impl {
    Eigen::SparseLU<EigenSparse> lu;
    EigenSparse matrix;
    // CSR slot -> position in the Eigen CSC value array, so refills avoid
    // rebuilding the structure.
    std::vector<Eigen::Index> slot_map;
    bool factorized = false;
};

RefactorableLu::RefactorableLu(const SparseMatrix& pattern) : impl_(std::make_unique<Impl>()) {
    if (pattern.rows() != pattern.cols())
        throw ConfigError("RefactorableLu: matrix must be square");
    impl_->matrix = to_eigen(pattern);
    if (static_cast<int>(impl_->matrix.nonZeros()) != pattern.nnz())
        throw ConfigError("RefactorableLu: pattern contains duplicate coordinates");

    impl_->slot_map.resize(static_cast<size_t>(pattern.nnz()));
    const auto offsets = pattern.row_offsets();
    const auto cols = pattern.col_indices();
    for (int row = 0; row < pattern.rows(); ++row) {
        for (int k = offsets[static_cast<size_t>(row)]; k < offsets[static_cast<size_t>(row) + 1]; ++k) {
            const int col = cols[static_cast<size_t>(k)];
            Eigen::Index pos = -1;
            for (Eigen::Index p = impl_->matrix.outerIndexPtr()[col];
                 p < impl_->matrix.outerIndexPtr()[col + 1]; ++p) {
                if (impl_->matrix.innerIndexPtr()[p] == row) {
                    pos = p;
                    break;
                }
            }
            if (pos < 0)
                throw NumericalError("RefactorableLu: slot map construction failed");
            impl_->slot_map[static_cast<size_t>(k)] = pos;
        }
    }
    impl_->lu.analyzePattern(impl_->matrix);
}

RefactorableLu::~RefactorableLu() = default;
RefactorableLu::RefactorableLu(RefactorableLu&&) noexcept = default;
RefactorableLu& RefactorableLu::operator=(RefactorableLu&&) noexcept = default;

void RefactorableLu::refactor(const SparseMatrix& same_pattern) {
    const auto vals = same_pattern.values();
    if (vals.size() != impl_->slot_map.size())
        throw ConfigError("RefactorableLu: pattern changed between refactorizations");
    double* dst = impl_->matrix.valuePtr();
    for (size_t k = 0; k < vals.size(); ++k)
        dst[impl_->slot_map[k]] = vals[k];
    impl_->lu.factorize(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success)
        throw NumericalError("RefactorableLu: numeric factorization failed");
    impl_->factorized = true;
}

std::vector<double> RefactorableLu::solve(std::span<const double> b) const {
    if (!impl_->factorized)
        throw NumericalError("RefactorableLu: solve before refactor");
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    std::vector<double> out(b.size());
    Eigen::Map<Eigen::VectorXd>(out.data(), x.size()) = x;
    if (!all_finite(out))
        throw NumericalError("RefactorableLu: non-finite solution");
    return out;
}

std::vector<double> bicgstab(const SparseMatrix& a, std::span<const double> b,
                             double rel_tol, int max_iterations,
                             const Preconditioner& precond, KrylovStats* stats) {
    const size_t n = b.size();
    if (a.rows() != static_cast<int>(n) || a.rows() != a.cols())
        throw ConfigError("bicgstab: dimension mismatch");

    const double bnorm = norm2(b);
    std::vector<double> x(n, 0.0);
    if (bnorm == 0.0) {
        if (stats)
            *stats = {0, 0.0};
        return x;
    }

    std::vector<double> r(b.begin(), b.end());
    std::vector<double> r0 = r;
    std::vector<double> p(n, 0.0), v(n, 0.0), s(n), t(n), phat, shat;
    double rho_prev = 1.0, alpha = 1.0, omega = 1.0;
    double resid = norm2(r) / bnorm;

    for (int it = 1; it <= max_iterations; ++it) {
        const double rho = dot(r0, r);
        if (rho == 0.0)
            throw NumericalError("bicgstab: breakdown (rho = 0)");
        if (it == 1) {
            p = r;
        } else {
            const double beta = (rho / rho_prev) * (alpha / omega);
            for (size_t i = 0; i < n; ++i)
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        phat = precond ? precond(p) : p;
        a.multiply(phat, v);
        const double r0v = dot(r0, v);
        if (r0v == 0.0)
            throw NumericalError("bicgstab: breakdown (r0.v = 0)");
        alpha = rho / r0v;
        for (size_t i = 0; i < n; ++i)
            s[i] = r[i] - alpha * v[i];
        if (norm2(s) / bnorm <= rel_tol) {
            axpy(alpha, phat, x);
            resid = norm2(s) / bnorm;
            if (stats)
                *stats = {it, resid};
            if (!all_finite(x))
                throw NumericalError("bicgstab: non-finite iterate");
            return x;
        }
        shat = precond ? precond(s) : s;
        a.multiply(shat, t);
        const double tt = dot(t, t);
        if (tt == 0.0)
            throw NumericalError("bicgstab: breakdown (t = 0)");
        omega = dot(t, s) / tt;
        if (omega == 0.0)
            throw NumericalError("bicgstab: breakdown (omega = 0)");
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        resid = norm2(r) / bnorm;
        if (resid <= rel_tol) {
            if (stats)
                *stats = {it, resid};
            if (!all_finite(x))
                throw NumericalError("bicgstab: non-finite iterate");
            return x;
        }
        rho_prev = rho;
    }
    std::ostringstream msg;
    msg << "bicgstab: no convergence in " << max_iterations
        << " iterations (relative residual " << resid << ", tolerance " << rel_tol << ")";
    throw NumericalError(msg.str());
}

std::vector<double> solve_linear(const SparseMatrix& a, std::span<const double> b,
                                 const SolveSettings& settings) {
    if (settings.method == SolveSettings::Method::direct_lu)
        return LuSolver(a).solve(b);
    return bicgstab(a, b, settings.rel_tol, settings.max_iterations);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v))
            return false;
    return true;
}

} // namespace spde
