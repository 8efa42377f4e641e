#include "spde/drift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spde/errors.hpp"
#include "spde/rng.hpp"

namespace spde {

DriftPolynomial::DriftPolynomial(std::vector<double> coeffs, double compensation)
    : coeffs_(std::move(coeffs)), compensation_(compensation) {
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0)
        coeffs_.pop_back();
    if (coeffs_.empty())
        coeffs_.push_back(0.0);
}

DriftPolynomial DriftPolynomial::with_compensation(double c0) const {
    DriftPolynomial p = *this;
    p.compensation_ = c0;
    return p;
}

double DriftPolynomial::eval(double x) const {
    double acc = 0.0;
    for (size_t k = coeffs_.size(); k-- > 0;)
        acc = acc * x + coeffs_[k];
    return acc + compensation_ * x;
}

double DriftPolynomial::derivative(double x) const {
    double acc = 0.0;
    for (size_t k = coeffs_.size(); k-- > 1;)
        acc = acc * x + coeffs_[k] * static_cast<double>(k);
    return acc + compensation_;
}

double DriftPolynomial::max_abs_derivative(double radius, int samples) const {
    double m = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double x = -radius + 2.0 * radius * static_cast<double>(i) / samples;
        m = std::max(m, std::abs(derivative(x)));
    }
    return m;
}

std::optional<std::string> assert_admissible(const DriftPolynomial& p) {
    for (double c : p.coefficients())
        if (!std::isfinite(c))
            return "drift polynomial has a non-finite coefficient";
    const int deg = p.degree();
    // Degree <= 1 is the globally Lipschitz trivial case and is always allowed.
    if (deg <= 1)
        return std::nullopt;
    if (deg % 2 == 0) {
        std::ostringstream msg;
        msg << "drift polynomial degree must be odd (got " << deg << ")";
        return msg.str();
    }
    if (!(p.leading_coefficient() < 0.0)) {
        std::ostringstream msg;
        msg << "drift polynomial leading coefficient must be negative (got "
            << p.leading_coefficient() << ")";
        return msg.str();
    }
    return std::nullopt;
}

namespace {

NodalField map_nodes(const DriftPolynomial& p, const NodalField& u, bool derivative) {
    NodalField out(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
        if (!std::isfinite(u[i])) {
            std::ostringstream msg;
            msg << "drift evaluation: non-finite value " << u[i] << " at node " << i;
            throw NumericalError(msg.str());
        }
        out[i] = derivative ? p.derivative(u[i]) : p.eval(u[i]);
    }
    return out;
}

} // namespace

NodalField eval_nemytskii(const DriftPolynomial& p, const NodalField& u) {
    return map_nodes(p, u, false);
}

NodalField eval_derivative(const DriftPolynomial& p, const NodalField& u) {
    return map_nodes(p, u, true);
}

double one_sided_constant_estimate(const DriftPolynomial& p, int trials, std::uint64_t seed) {
    if (trials < 1)
        throw ConfigError("one_sided_constant_estimate: need at least one trial");
    CounterRng rng(seed, /*stream=*/0x4f4e4553u); // "ONES"
    constexpr double radii[] = {1.0, 10.0, 100.0};
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const double r = radii[t % 3];
        double a = rng.uniform(-r, r);
        double b = rng.uniform(-r, r);
        while (a == b)
            b = rng.uniform(-r, r);
        const double q = (p.eval(a) - p.eval(b)) / (a - b);
        worst = std::max(worst, q);
    }
    return worst;
}

} // namespace spde
