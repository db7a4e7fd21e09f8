#pragma once

#include <string>

#include "nsvfp/nonlinear.hpp"

namespace nsvfp {

/// Checkpoint layout, version 1: one JSON header line, then the Fourier
/// coefficients as native-endian doubles (real, imaginary interleaved) in the
/// order f (point-major), rho, u_0, u_1, u_2, theta. Velocity coefficients
/// refer to the orthonormal Hermite-function basis with psi_000 = sqrt M.
void save_checkpoint(const std::string& path, const FieldState& s);
FieldState load_checkpoint(const std::string& path);

} // namespace nsvfp
