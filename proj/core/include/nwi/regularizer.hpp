// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nwi/field.hpp"

namespace nwi {

/// Frobenius norm of the two-component 3x3 Sobel edge response,
/// mirror boundary.
double sobel_penalty(const Field& map);

/// Analytic gradient of sobel_penalty (zero map when the penalty is zero).
Field sobel_penalty_gradient(const Field& map);

/// The raw responses (correlation with the Sobel kernels), exposed for
/// testing the hand-applied kernel values.
Field sobel_response_x(const Field& map);
Field sobel_response_z(const Field& map);

}  // namespace nwi
