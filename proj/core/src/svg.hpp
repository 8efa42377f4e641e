#pragma once

#include <filesystem>

#include "spde/experiment.hpp"

namespace spde::detail {

void write_convergence_svg(const ConvergenceReport& report, const std::filesystem::path& file);

} // namespace spde::detail
