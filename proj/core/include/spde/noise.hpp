#pragma once

#include <cstdint>
#include <vector>

#include "spde/fem.hpp"
#include "spde/mesh.hpp"

namespace spde {

// Truncated spectrum of the noise covariance in the Neumann cosine basis on
// [0,l1] x [0,l2]: mode (i,j) carries weight q_ij = (i^2 + j^2)^{-(beta + delta)}
// for (i,j) != (0,0), and the constant mode is switched off. trace_check is the
// weighted tail sum_{ij} lambda_ij^{beta-1} q_ij with lambda_ij the Neumann
// Laplacian eigenvalues; finiteness of that sum (for small delta > 0) is what
// the convergence theory needs, and the CLI prints it as a diagnostic.
struct NoiseSpec {
    double beta = 2.0;
    double delta = 0.001;
    int n1 = 64;
    int n2 = 64;
    double l1 = 1.0;
    double l2 = 1.0;
    std::vector<double> q; // (n1+1)*(n2+1), row-major in i
    double trace_check = 0.0;

    double q_at(int i, int j) const { return q[static_cast<size_t>(i) * (n2 + 1) + j]; }
    int n_modes() const { return (n1 + 1) * (n2 + 1); }
};

NoiseSpec build_spectrum(double beta, double delta, int n1, int n2, double l1, double l2);

// All Brownian increments of one Monte Carlo sample at the finest resolution:
// increments[(step * (n1+1) + i) * (n2+1) + j] ~ N(0, q_ij * dt_fine), drawn by
// counter (sample, step, mode), so the tableau is identical no matter which
// subset is evaluated or in what order. Every entry is rounded to the 2^-26
// grid; block sums of grid numbers this small are exact in double precision, so
// coarse increments assembled from any aggregation of fine steps agree bitwise.
struct BrownianPath {
    std::uint64_t master_seed = 0;
    std::uint32_t sample_index = 0;
    int n_fine_steps = 0;
    double dt_fine = 0.0;
    int n1 = 0;
    int n2 = 0;
    std::vector<double> increments;

    double at(int step, int i, int j) const {
        return increments[(static_cast<size_t>(step) * (n1 + 1) + static_cast<size_t>(i)) *
                              (n2 + 1) +
                          static_cast<size_t>(j)];
    }
};

BrownianPath sample_path(const NoiseSpec& spec, int n_fine_steps, double dt_fine,
                         std::uint64_t master_seed, std::uint32_t sample_index);

// Coarse modal increment over [coarse_step*agg, (coarse_step+1)*agg) fine steps;
// exact in any grouping thanks to the grid rounding above.
std::vector<double> modal_block_sum(const BrownianPath& path, int coarse_step, int aggregation);

// Cosine eigenbasis values tabulated per mesh so repeated increment evaluation
// is two small matrix products instead of trig calls per node and mode.
class KlTable {
public:
    KlTable(const NoiseSpec& spec, const Mesh& mesh);

    // Nodal field of the coarse noise increment: sum_ij e_i(x) e_j(y) dB_ij.
    NodalField nodal_increment(const BrownianPath& path, int coarse_step, int aggregation) const;
    NodalField nodal_from_modal(std::span<const double> modal) const;

    // Pointwise variance of the unit-time noise at a node: sum_ij q_ij e_i^2 e_j^2.
    double variance_at_node(int node) const;

private:
    int n1_;
    int n2_;
    int nx_nodes_;
    int ny_nodes_;
    std::vector<double> ex_; // (n1+1) x (nx+1), mode-major
    std::vector<double> ey_; // (n2+1) x (ny+1), mode-major
    std::vector<double> sqrt_q_;
};

// Convenience wrapper matching the one-shot contract; builds the table per call.
NodalField nodal_increment(const NoiseSpec& spec, const Mesh& mesh, const BrownianPath& path,
                           int coarse_step, int aggregation);

} // namespace spde
