// Sparse matrix construction, matvec, and the two linear-solver routes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spde/errors.hpp"
#include "spde/linalg.hpp"
#include "spde/rng.hpp"

using namespace spde;

namespace {

std::vector<double> random_vector(int n, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v)
        x = rng.uniform(lo, hi);
    return v;
}

// Dense row-diagonally-dominant test matrix in triplet form, nonsymmetric.
SparseMatrix random_dominant(int n, CounterRng& rng) {
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i)
                continue;
            if (rng.uniform01() < 0.25) {
                const double v = rng.uniform(-1.0, 1.0);
                t.push_back({i, j, v});
                off += std::abs(v);
            }
        }
        t.push_back({i, i, off + 1.0 + rng.uniform01()});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

} // namespace

TEST_CASE("from_triplets sums duplicates and sorts columns") {
    {
        SparseMatrix a =
            SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
        CHECK(a.nnz() == 2);
        CHECK(a.coeff(0, 0) == 1.0);
        CHECK(a.coeff(1, 1) == 1.0);
        CHECK(a.coeff(0, 1) == 0.0);
    }
    {
        SparseMatrix a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}});
        CHECK(a.nnz() == 1);
        CHECK(a.coeff(0, 0) == 3.0);
    }
    {
        // Hand-sorted CSR layout.
        SparseMatrix a =
            SparseMatrix::from_triplets(2, 2, {{0, 1, 5.0}, {0, 0, 1.0}, {1, 0, 2.0}, {1, 1, 4.0}});
        REQUIRE(a.nnz() == 4);
        const std::vector<int> offsets(a.row_offsets().begin(), a.row_offsets().end());
        const std::vector<int> cols(a.col_indices().begin(), a.col_indices().end());
        const std::vector<double> vals(a.values().begin(), a.values().end());
        CHECK(offsets == std::vector<int>{0, 2, 4});
        CHECK(cols == std::vector<int>{0, 1, 0, 1});
        CHECK(vals == std::vector<double>{1.0, 5.0, 2.0, 4.0});
    }
}

TEST_CASE("from_triplets drops exact zero sums and rejects bad indices") {
    SparseMatrix a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, -1.0}, {1, 1, 2.0}});
    CHECK(a.nnz() == 1);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 2, 1.0}}), ConfigError);
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{-1, 0, 1.0}}), ConfigError);
}

TEST_CASE("matvec basics") {
    {
        SparseMatrix id = SparseMatrix::identity(3);
        const std::vector<double> y = id.multiply(std::vector<double>{1.0, 2.0, 3.0});
        CHECK(y == std::vector<double>{1.0, 2.0, 3.0});
    }
    {
        SparseMatrix d = SparseMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 4.0}});
        const std::vector<double> y = d.multiply(std::vector<double>{1.0, 2.0});
        CHECK(y == std::vector<double>{2.0, 8.0});
    }
    {
        SparseMatrix z = SparseMatrix::from_triplets(2, 2, {});
        const std::vector<double> y = z.multiply(std::vector<double>{3.0, -7.0});
        CHECK(y == std::vector<double>{0.0, 0.0});
    }
}

TEST_CASE("matvec is linear") {
    CounterRng rng(99, 1);
    SparseMatrix a = random_dominant(20, rng);
    const auto x = random_vector(20, rng);
    const auto y = random_vector(20, rng);
    const double alpha = 0.7, beta = -1.3;
    std::vector<double> combo(20);
    for (int i = 0; i < 20; ++i)
        combo[static_cast<size_t>(i)] =
            alpha * x[static_cast<size_t>(i)] + beta * y[static_cast<size_t>(i)];
    const auto lhs = a.multiply(combo);
    const auto ax = a.multiply(x);
    const auto ay = a.multiply(y);
    for (int i = 0; i < 20; ++i)
        CHECK(lhs[static_cast<size_t>(i)] ==
              doctest::Approx(alpha * ax[static_cast<size_t>(i)] + beta * ay[static_cast<size_t>(i)])
                  .epsilon(1e-13));
}

TEST_CASE("transpose, scale and weighted sum") {
    SparseMatrix a =
        SparseMatrix::from_triplets(2, 3, {{0, 1, 5.0}, {1, 0, 2.0}, {1, 2, -1.0}});
    SparseMatrix at = a.transposed();
    CHECK(at.rows() == 3);
    CHECK(at.cols() == 2);
    CHECK(at.coeff(1, 0) == 5.0);
    CHECK(at.coeff(0, 1) == 2.0);
    CHECK(at.coeff(2, 1) == -1.0);

    SparseMatrix s = a.scaled(-2.0);
    CHECK(s.coeff(0, 1) == -10.0);

    SparseMatrix b =
        SparseMatrix::from_triplets(2, 3, {{0, 0, 1.0}, {0, 1, 1.0}});
    SparseMatrix w = SparseMatrix::weighted_sum(a, 1.0, b, 3.0);
    CHECK(w.coeff(0, 0) == 3.0);
    CHECK(w.coeff(0, 1) == 8.0);
    CHECK(w.coeff(1, 2) == -1.0);
}

TEST_CASE("extract renumbers a submatrix in list order") {
    SparseMatrix a = SparseMatrix::from_triplets(
        3, 3, {{0, 0, 1.0}, {0, 2, 2.0}, {1, 1, 3.0}, {2, 0, 4.0}, {2, 2, 5.0}});
    const std::vector<int> rows{2, 0};
    const std::vector<int> cols{0, 2};
    SparseMatrix sub = a.extract(rows, cols);
    CHECK(sub.rows() == 2);
    CHECK(sub.cols() == 2);
    CHECK(sub.coeff(0, 0) == 4.0);
    CHECK(sub.coeff(0, 1) == 5.0);
    CHECK(sub.coeff(1, 0) == 1.0);
    CHECK(sub.coeff(1, 1) == 2.0);
}

TEST_CASE("direct LU solves small systems") {
    {
        SparseMatrix id = SparseMatrix::identity(2);
        LuSolver lu(id);
        const auto x = lu.solve(std::vector<double>{7.0, -3.0});
        CHECK(x[0] == doctest::Approx(7.0).epsilon(1e-14));
        CHECK(x[1] == doctest::Approx(-3.0).epsilon(1e-14));
    }
    {
        SparseMatrix d = SparseMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 4.0}});
        LuSolver lu(d);
        const auto x = lu.solve(std::vector<double>{2.0, 8.0});
        CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-14));
    }
    {
        // Nonsymmetric upper-triangular case: back substitution by hand gives (1,1).
        SparseMatrix u =
            SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 1, 1.0}});
        LuSolver lu(u);
        const auto x = lu.solve(std::vector<double>{2.0, 1.0});
        CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("residual bound holds for random systems on both routes") {
    CounterRng rng(2024, 7);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 10 + trial * 5;
        SparseMatrix a = random_dominant(n, rng);
        const auto b = random_vector(n, rng);

        SolveSettings direct;
        direct.method = SolveSettings::Method::direct_lu;
        direct.rel_tol = 1e-12;
        const auto x1 = solve_linear(a, b, direct);

        SolveSettings krylov;
        krylov.method = SolveSettings::Method::krylov_nonsymmetric;
        krylov.rel_tol = 1e-12;
        const auto x2 = solve_linear(a, b, krylov);

        auto residual = [&](const std::vector<double>& x) {
            auto r = a.multiply(x);
            axpy(-1.0, b, r);
            return norm2(r);
        };
        const double scale = norm2(b);
        CHECK(residual(x1) <= 1e-11 * scale);
        CHECK(residual(x2) <= 1e-11 * scale);

        // The two routes are independent implementations; they must agree.
        std::vector<double> gap = x1;
        axpy(-1.0, x2, gap);
        CHECK(norm2(gap) <= 1e-8 * norm2(x1));
    }
}

TEST_CASE("bicgstab reports breakdown on a singular system") {
    SparseMatrix sing = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 0, 1.0}});
    CHECK_THROWS_AS(bicgstab(sing, std::vector<double>{1.0, 0.0}, 1e-12, 50), NumericalError);
}

TEST_CASE("refactorable LU tracks value changes on a fixed pattern") {
    CounterRng rng(5, 5);
    SparseMatrix a = random_dominant(15, rng);
    RefactorableLu lu(a);
    const auto b = random_vector(15, rng);
    {
        lu.refactor(a);
        auto x = lu.solve(b);
        auto r = a.multiply(x);
        axpy(-1.0, b, r);
        CHECK(norm2(r) <= 1e-11 * norm2(b));
    }
    {
        // Same pattern, shifted diagonal.
        SparseMatrix shifted = SparseMatrix::weighted_sum(a, 1.0, SparseMatrix::identity(15), 0.0);
        auto vals = shifted.values_mut();
        auto offsets = shifted.row_offsets();
        auto cols = shifted.col_indices();
        for (int i = 0; i < 15; ++i)
            for (int k = offsets[i]; k < offsets[i + 1]; ++k)
                if (cols[static_cast<size_t>(k)] == i)
                    vals[static_cast<size_t>(k)] += 2.5;
        lu.refactor(shifted);
        auto x = lu.solve(b);
        auto r = shifted.multiply(x);
        axpy(-1.0, b, r);
        CHECK(norm2(r) <= 1e-11 * norm2(b));
    }
}

TEST_CASE("vector helpers") {
    const std::vector<double> a{1.0, -2.0, 3.0};
    const std::vector<double> b{4.0, 0.5, -1.0};
    CHECK(dot(a, b) == doctest::Approx(4.0 - 1.0 - 3.0).epsilon(1e-15));
    CHECK(norm2(a) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-15));
    CHECK(max_abs(a) == 3.0);
    CHECK(all_finite(a));
    std::vector<double> y = b;
    axpy(2.0, a, y);
    CHECK(y[0] == 6.0);
    CHECK(y[1] == -3.5);
    CHECK(y[2] == 5.0);
    const std::vector<double> bad{1.0, std::nan(""), 0.0};
    CHECK(!all_finite(bad));
}
