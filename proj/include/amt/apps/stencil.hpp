#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace amt {

class runtime;

/// How the cells just outside the domain are treated.
enum class stencil_boundary {
  fixed_zero,  ///< ghost cells hold 0: heat leaks out at both ends
  zero_flux,   ///< ghost cells mirror the edge cell: heat is conserved
};

inline constexpr double stencil_alpha = 0.25;

/// One update of the three-point heat stencil
/// u'[i] = u[i] + alpha * (u[i-1] - 2 u[i] + u[i+1]).
inline double stencil_cell(double left, double mid, double right) {
  return mid + stencil_alpha * (left - 2.0 * mid + right);
}

/// Initial fields by name: "spike" (1.0 in the middle cell), "uniform"
/// (all 1.0), "ramp" (i / cells). Throws invalid_argument otherwise.
std::vector<double> stencil_initial(std::size_t cells, std::string_view shape);

/// Reference implementation on one thread.
std::vector<double> stencil_serial(std::vector<double> u, std::size_t steps,
                                   stencil_boundary boundary);

/// Runs the stencil with one partition per locality and gathers the field
/// back to the caller. Halo values travel through channels published in
/// AGAS; each step computes the interior before waiting for halos. The cell
/// count must be divisible by the locality count.
std::vector<double> run_stencil(runtime& rt, const std::vector<double>& u0, std::size_t steps,
                                stencil_boundary boundary);

} // namespace amt
