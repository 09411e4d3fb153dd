"""Fields and flows on the 2-torus: the basic vocabulary.

Builds a few scalar fields on the truncated Fourier basis, checks Parseval
and Sobolev norms against grid quadrature, and constructs the two reference
flows (the sin y shear and the sin x sin y cellular flow) with their exact
velocity expansions.
"""

import numpy as np

import torusmix as tm

print("== scalar fields ==")
f = tm.make_field(8, [((0, 1), "cos", 1.0), ((2, 1), "sin", 0.5), ((3, -2), "cos", 0.25)])
print(f"L2 norm  : {f.norm(0):.12f}  (coefficient sum: sqrt(1 + 0.25 + 0.0625))")
print(f"H1 norm  : {f.norm(1):.12f}")
print(f"H1/2 norm: {f.norm(0.5):.12f}")

M = 64
vals = tm.sample_grid(f, M)
quad = (2 * np.pi / M) ** 2 * np.sum(vals**2)
print(f"grid quadrature of f^2: {quad:.15f}  vs  ||f||^2 = {f.norm(0)**2:.15f}")

low = tm.project_low(f, 2)
print(f"projection to |k|_inf <= 2 keeps {np.count_nonzero(low.coeffs)} coefficients, "
      f"norm {low.norm(0):.6f} <= {f.norm(0):.6f}")

print()
print("== the reference shear flow u(y) = sin y ==")
shear = tm.sin_shear()
for mode, (u1, u2) in tm.velocity_coefficients(shear):
    print(f"  velocity mode {mode}: u1 = {u1}, u2 = {u2}")
print(f"Lipschitz bound: {shear.lipschitz_bound}")
print(f"critical points of u' found by sampling: {shear.profile_critical_points}")

print()
print("== the reference cellular flow psi = sin x sin y ==")
cell = tm.default_cellular_flow()
print(f"velocity support: {sorted(cell.velocity)}")
u1, u2 = cell.velocity_on_grid(8)
x = 2 * np.pi * np.arange(8) / 8
X, Y = np.meshgrid(x, x, indexing="ij")
print(f"max |u1 + sin x cos y| on the grid: {np.max(np.abs(u1 + np.sin(X) * np.cos(Y))):.2e}")
print(f"max |u2 - cos x sin y| on the grid: {np.max(np.abs(u2 - np.cos(X) * np.sin(Y))):.2e}")
div = max(abs(m1 * a1 + m2 * a2) for (m1, m2), (a1, a2) in cell.velocity.items())
print(f"divergence per mode (exact): {div:.2e}")
