#pragma once

#include <stdexcept>
#include <string>

namespace spde {

// Configuration or validation problem: bad input, inconsistent parameters,
// violated admissibility preconditions. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Solver breakdown: singular factorization, Krylov stagnation, Newton
// non-convergence, non-finite values. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem problem while reading configs or writing reports. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace spde
