#include "spde/noise.hpp"

#include <cmath>
#include <sstream>

#include "spde/errors.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

constexpr std::uint32_t noise_domain_tag = 0x6e6f6973u; // "nois"
constexpr double grid = 0x1.0p26;
constexpr double inv_grid = 0x1.0p-26;

// Snap to the 2^-26 lattice. Increments live well inside [-1, 1], so the
// scaled values stay far below 2^53 and later block sums are exact.
inline double quantize(double x) { return std::nearbyint(x * grid) * inv_grid; }

} // namespace

NoiseSpec build_spectrum(double beta, double delta, int n1, int n2, double l1, double l2) {
    if (!(beta >= 1.0))
        throw ConfigError("build_spectrum: beta must be >= 1");
    if (!(delta > 0.0))
        throw ConfigError("build_spectrum: delta must be > 0");
    if (n1 < 1 || n2 < 1)
        throw ConfigError("build_spectrum: need at least one mode per direction");
    if (!(l1 > 0.0) || !(l2 > 0.0))
        throw ConfigError("build_spectrum: domain lengths must be positive");

    NoiseSpec spec;
    spec.beta = beta;
    spec.delta = delta;
    spec.n1 = n1;
    spec.n2 = n2;
    spec.l1 = l1;
    spec.l2 = l2;
    spec.q.assign(static_cast<size_t>((n1 + 1) * (n2 + 1)), 0.0);

    const double pi = 4.0 * std::atan(1.0);
    double trace = 0.0;
    for (int i = 0; i <= n1; ++i) {
        for (int j = 0; j <= n2; ++j) {
            if (i == 0 && j == 0)
                continue; // constant mode carries no noise
            const double qij =
                std::pow(static_cast<double>(i) * i + static_cast<double>(j) * j, -(beta + delta));
            spec.q[static_cast<size_t>(i) * (n2 + 1) + j] = qij;
            const double lambda = (i * pi / l1) * (i * pi / l1) + (j * pi / l2) * (j * pi / l2);
            trace += std::pow(lambda, beta - 1.0) * qij;
        }
    }
    spec.trace_check = trace;
    return spec;
}

BrownianPath sample_path(const NoiseSpec& spec, int n_fine_steps, double dt_fine,
                         std::uint64_t master_seed, std::uint32_t sample_index) {
    if (n_fine_steps < 1)
        throw ConfigError("sample_path: need at least one fine step");
    if (!(dt_fine > 0.0))
        throw ConfigError("sample_path: dt_fine must be positive");

    BrownianPath path;
    path.master_seed = master_seed;
    path.sample_index = sample_index;
    path.n_fine_steps = n_fine_steps;
    path.dt_fine = dt_fine;
    path.n1 = spec.n1;
    path.n2 = spec.n2;
    const size_t modes = static_cast<size_t>(spec.n_modes());
    path.increments.assign(static_cast<size_t>(n_fine_steps) * modes, 0.0);

    const double sqrt_dt = std::sqrt(dt_fine);
    for (int step = 0; step < n_fine_steps; ++step) {
        double* out = path.increments.data() + static_cast<size_t>(step) * modes;
        for (int i = 0; i <= spec.n1; ++i) {
            for (int j = 0; j <= spec.n2; ++j) {
                const double qij = spec.q_at(i, j);
                if (qij == 0.0)
                    continue;
                const std::uint32_t mode =
                    static_cast<std::uint32_t>(i) * static_cast<std::uint32_t>(spec.n2 + 1) +
                    static_cast<std::uint32_t>(j);
                const double z = gaussian_at(master_seed, sample_index,
                                             static_cast<std::uint32_t>(step), mode,
                                             noise_domain_tag);
                out[static_cast<size_t>(i) * (spec.n2 + 1) + j] =
                    quantize(std::sqrt(qij) * sqrt_dt * z);
            }
        }
    }
    return path;
}

std::vector<double> modal_block_sum(const BrownianPath& path, int coarse_step, int aggregation) {
    if (aggregation < 1)
        throw ConfigError("modal_block_sum: aggregation must be >= 1");
    const int first = coarse_step * aggregation;
    if (first < 0 || first + aggregation > path.n_fine_steps) {
        std::ostringstream msg;
        msg << "modal_block_sum: coarse step " << coarse_step << " x " << aggregation
            << " leaves the tableau of " << path.n_fine_steps << " fine steps";
        throw ConfigError(msg.str());
    }
    const size_t modes = static_cast<size_t>((path.n1 + 1) * (path.n2 + 1));
    std::vector<double> sum(modes, 0.0);
    for (int s = first; s < first + aggregation; ++s) {
        const double* src = path.increments.data() + static_cast<size_t>(s) * modes;
        for (size_t m = 0; m < modes; ++m)
            sum[m] += src[m];
    }
    return sum;
}

KlTable::KlTable(const NoiseSpec& spec, const Mesh& mesh)
    : n1_(spec.n1), n2_(spec.n2), nx_nodes_(mesh.nx + 1), ny_nodes_(mesh.ny + 1),
      sqrt_q_(spec.q.size()) {
    if (spec.l1 != mesh.l1 || spec.l2 != mesh.l2)
        throw ConfigError("KlTable: noise spectrum and mesh disagree on the domain");
    for (size_t k = 0; k < spec.q.size(); ++k)
        sqrt_q_[k] = std::sqrt(spec.q[k]);

    const double pi = 4.0 * std::atan(1.0);
    ex_.resize(static_cast<size_t>(n1_ + 1) * nx_nodes_);
    ey_.resize(static_cast<size_t>(n2_ + 1) * ny_nodes_);
    for (int i = 0; i <= n1_; ++i) {
        const double amp = i == 0 ? std::sqrt(1.0 / mesh.l1) : std::sqrt(2.0 / mesh.l1);
        for (int ix = 0; ix < nx_nodes_; ++ix) {
            const double x = mesh.nodes[static_cast<size_t>(ix)].x;
            ex_[static_cast<size_t>(i) * nx_nodes_ + ix] = amp * std::cos(i * pi * x / mesh.l1);
        }
    }
    for (int j = 0; j <= n2_; ++j) {
        const double amp = j == 0 ? std::sqrt(1.0 / mesh.l2) : std::sqrt(2.0 / mesh.l2);
        for (int iy = 0; iy < ny_nodes_; ++iy) {
            const double y = mesh.nodes[static_cast<size_t>(iy) * nx_nodes_].y;
            ey_[static_cast<size_t>(j) * ny_nodes_ + iy] = amp * std::cos(j * pi * y / mesh.l2);
        }
    }
}

NodalField KlTable::nodal_from_modal(std::span<const double> modal) const {
    if (modal.size() != static_cast<size_t>((n1_ + 1) * (n2_ + 1)))
        throw ConfigError("nodal_from_modal: modal vector has wrong length");

    // H[i][iy] = sum_j modal[i][j] * ey[j][iy]
    std::vector<double> h(static_cast<size_t>(n1_ + 1) * ny_nodes_, 0.0);
    for (int i = 0; i <= n1_; ++i) {
        double* hrow = h.data() + static_cast<size_t>(i) * ny_nodes_;
        for (int j = 0; j <= n2_; ++j) {
            const double v = modal[static_cast<size_t>(i) * (n2_ + 1) + j];
            if (v == 0.0)
                continue;
            const double* erow = ey_.data() + static_cast<size_t>(j) * ny_nodes_;
            for (int iy = 0; iy < ny_nodes_; ++iy)
                hrow[iy] += v * erow[iy];
        }
    }

    NodalField out(static_cast<size_t>(nx_nodes_) * ny_nodes_, 0.0);
    for (int iy = 0; iy < ny_nodes_; ++iy) {
        double* orow = out.data() + static_cast<size_t>(iy) * nx_nodes_;
        for (int i = 0; i <= n1_; ++i) {
            const double w = h[static_cast<size_t>(i) * ny_nodes_ + iy];
            if (w == 0.0)
                continue;
            const double* erow = ex_.data() + static_cast<size_t>(i) * nx_nodes_;
            for (int ix = 0; ix < nx_nodes_; ++ix)
                orow[ix] += w * erow[ix];
        }
    }
    return out;
}

NodalField KlTable::nodal_increment(const BrownianPath& path, int coarse_step,
                                    int aggregation) const {
    if (path.n1 != n1_ || path.n2 != n2_)
        throw ConfigError("nodal_increment: path and table disagree on mode counts");
    return nodal_from_modal(modal_block_sum(path, coarse_step, aggregation));
}

double KlTable::variance_at_node(int node) const {
    const int ix = node % nx_nodes_;
    const int iy = node / nx_nodes_;
    double acc = 0.0;
    for (int i = 0; i <= n1_; ++i) {
        const double ex2 = ex_[static_cast<size_t>(i) * nx_nodes_ + ix] *
                           ex_[static_cast<size_t>(i) * nx_nodes_ + ix];
        for (int j = 0; j <= n2_; ++j) {
            const double sq = sqrt_q_[static_cast<size_t>(i) * (n2_ + 1) + j];
            const double ey2 = ey_[static_cast<size_t>(j) * ny_nodes_ + iy] *
                               ey_[static_cast<size_t>(j) * ny_nodes_ + iy];
            acc += sq * sq * ex2 * ey2;
        }
    }
    return acc;
}

NodalField nodal_increment(const NoiseSpec& spec, const Mesh& mesh, const BrownianPath& path,
                           int coarse_step, int aggregation) {
    return KlTable(spec, mesh).nodal_increment(path, coarse_step, aggregation);
}

} // namespace spde
