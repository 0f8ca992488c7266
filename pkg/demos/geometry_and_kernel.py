"""Group law, balls and the frozen fundamental solution on the prototype structure.

The prototype is the operator d_11 + x1 d_2 - d_t on R^2 x R: one diffusive
direction x1, one transported direction x2.  Dilations scale (x1, x2, t) by
(lam, lam^3, lam^2), so volumes scale with the homogeneous dimension 6.
"""

import math

import numpy as np

from ultrapar import diagnostics
from ultrapar.kernel import FrozenKernel, covariance, gamma0, sample_paths
from ultrapar.structure import GroupBall, compose, dilate, invert, prototype, qdist

s = prototype()
print(f"Q = {s.Q}, Q+2 = {s.homogeneous_dimension}, exponents = {s.exponents}")

# the group law is not commutative: the transported coordinate picks up t * x1
z, w = np.array([1.0, 0.0, 0.5]), np.array([0.0, 0.0, 1.0])
print("z o w =", compose(s, z, w), "  w o z =", compose(s, w, z))
print("z o z^-1 =", compose(s, z, invert(s, z)))
print("d(2 z, 0) / d(z, 0) =", qdist(s, dilate(s, 2.0, z), np.zeros(3)) / qdist(s, z, np.zeros(3)))

# doubling: |B_2R| / |B_R| = 2^(Q+2)
print("doubling exponent:", diagnostics.doubling_exponent(s))
print("unit ball volume :", GroupBall([0, 0, 0], 1.0).volume(s))

# the covariance C(t) = int_0^t E(s) A0 E(s)^T ds has entries t, -t^2/2, t^3/3
k = FrozenKernel(s)
print("C(1) =\n", covariance(k, 1.0).C)
print("Gamma0((0,0,1), 0) =", float(gamma0(k, [0, 0, 1], [0, 0, 0])), " sqrt(3)/(2 pi) =", math.sqrt(3) / (2 * math.pi))
for t in (0.25, 1.0, 4.0):
    print(f"mass at t={t}: {diagnostics.mass(k, t):.10f}")

# the kernel is the transition density of dX1 = sqrt(2) dW, dX2 = -X1 dt
ens = sample_paths(k, [1.0, 0.0], 1.0, 20_000, 200, seed=0)
print("Monte Carlo mean", ens.mean(), " cov\n", ens.cov(), "\n2 C(1)\n", 2 * covariance(k, 1.0).C)
