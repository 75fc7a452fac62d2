// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "nwi/field.hpp"

namespace nwi {

/// Second-order central differences (central2) is the only scheme in v1.
enum class KernelChoice { central2 };

/// Discrete gradient: central differences in the interior, one-sided
/// first-order differences on boundary cells. Returns (d/di, d/dj).
std::pair<Field, Field> grad(const Field& f, double dx);

/// In-place variants writing into preallocated outputs (hot path).
void grad_into(const Field& f, double dx, Field& gx, Field& gz);

/// Exact transpose of the grad component operators: <G f, y> == <f, G^T y>.
void grad_x_transpose_into(const Field& y, double dx, Field& out);
void grad_z_transpose_into(const Field& y, double dx, Field& out);

/// 5-point Laplacian with mirrored (zero normal derivative) closure:
/// out-of-range neighbours reflect about the boundary node, f[-1] = f[1].
Field laplacian(const Field& f, double dx);
void laplacian_into(const Field& f, double dx, Field& out);

/// Exact transpose of the mirrored 5-point Laplacian.
void laplacian_transpose_into(const Field& y, double dx, Field& out);

/// Elementwise dot product of two gradient vector fields:
/// out = gx_a .* gx_b + gz_a .* gz_b.
Field density_coupling(const std::pair<Field, Field>& invq_grad,
                       const std::pair<Field, Field>& u_grad);

}  // namespace nwi
