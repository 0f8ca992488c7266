"""Convergence of the IMEX marcher and comparison with the convolution solver.

The marcher is first order in (h, dt) jointly, so the error of a caloric
polynomial halves with every grid refinement.  The convolution solver
freezes the coefficients and applies Gamma0 to the sources; with matching
boundary data both solvers approximate the same function.
"""

import time

import numpy as np

from ultrapar.coefficients import gaussian_bump
from ultrapar.grid import GridFunction
from ultrapar.kernel import FrozenKernel
from ultrapar.solver import ProblemSpec, solve_forward, solve_frozen_convolution
from ultrapar.structure import prototype

s = prototype()
lo, hi = [-1, -1, 0], [1, 1, 1]


def quartic(P):
    x1, x2, t = P[..., 0], P[..., 1], P[..., 2]
    return x1 ** 4 + 12 * x1 ** 2 * t + 12 * t ** 2 + (x2 + t * x1) ** 2 + 2 / 3 * t ** 3


errs = []
for n in (17, 33, 65):
    t0 = time.perf_counter()
    u = solve_forward(ProblemSpec(s, lo, hi, (n,) * 3, data=quartic))
    errs.append(np.abs(u.values - quartic(u.points())).max())
    print(f"n={n:3d}  max error {errs[-1]:.3e}  (dt = {u.provenance['dt']:.4f}, {time.perf_counter() - t0:.1f} s)")
print("observed orders:", np.log2(np.array(errs[:-1]) / errs[1:]))

g = gaussian_bump([0.1, -0.1, 0.3], [0.25, 0.25, 0.1])
for n in (33, 49):
    G = GridFunction.from_function(lo, hi, (n,) * 3, g)
    uc = solve_frozen_convolution(FrozenKernel(s), G)
    uf = solve_forward(ProblemSpec(s, lo, hi, (n,) * 3, g=g, data=lambda P: uc(P, method="cubic")))
    gap = np.sqrt(np.sum(uc.weights * (uf.values - uc.values) ** 2) / np.sum(uc.weights * uc.values ** 2))
    print(f"n={n}: relative L2 gap between the two solvers {gap:.2%}")
