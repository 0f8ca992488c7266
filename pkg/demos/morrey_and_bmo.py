"""Morrey norms and the BMO modulus of coefficient presets.

eta_R(a) is the largest mean oscillation of a over balls of radius at most R.
It tends to 0 with R for VMO coefficients and stays away from 0 for a jump.
"""

import numpy as np

from ultrapar.coefficients import PRESETS, make_coefficient
from ultrapar.grid import GridFunction
from ultrapar.spaces import default_morrey_params, eta_curve, lattice_centers, lp_norm, morrey_norm
from ultrapar.structure import prototype

s = prototype()
lo, hi = np.array([-1.0, -1, 0]), np.array([1.0, 1, 1])
centers = lattice_centers(lo, hi, 3)

for name in sorted(PRESETS):
    a_field = make_coefficient(name, 1)
    a = GridFunction.from_function(lo, hi, (33,) * 3, lambda P: a_field.scalar_values(P))
    R, eta = eta_curve(a, centers, s)
    print(f"{name:12s} eta at R = {R[0]:.3f}: {eta[0]:.4f}   at R = {R[-1]:.3f}: {eta[-1]:.4f}")

u = GridFunction.from_function(lo, hi, (33,) * 3, lambda P: np.exp(-8 * np.sum(P[..., :2] ** 2, -1)))
print("L^2.2 norm:", lp_norm(u, 2.2))
for lam in (0.0, 1.0, 3.0, 5.0):
    mp = default_morrey_params(s, u, 2.2, lam, n_centers=3)
    print(f"Morrey norm p=2.2 lambda={lam}: {morrey_norm(u, mp, s):.4f}")
