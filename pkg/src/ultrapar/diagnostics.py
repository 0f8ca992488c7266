"""Self-checks of the geometry and of the frozen kernel.

Each function returns a plain dict (JSON-ready) with the measured error and
the tolerance it is judged against.  The CLI runs them under
``structure-info`` and ``kernel-check``; the test suite reuses them.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .kernel import (FrozenKernel, covariance, covariance_quadrature, covariance_vanloan, euler_moments,
                     gamma0, grad0_gamma0, sample_paths)
from .quadrature import ball_rule
from .structure import (KolmogorovStructure, _apply_E, compose, dilate, exp_neg_BT, hnorm, invert,
                        measure_c0)


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _random_points(s: KolmogorovStructure, n: int, rng, scale: float = 1.0) -> np.ndarray:
    return scale * rng.uniform(-1, 1, size=(n, s.dim))


# ---------------------------------------------------------------- structure

def doubling_exponent(s: KolmogorovStructure, R: float = 0.5, n: int = 8) -> float:
    """log2(|B_2R| / |B_R|) from the ball quadrature weights (equals Q + 2)."""
    z0 = np.zeros(s.dim)
    v1 = ball_rule(s, z0, R, n)[1].sum()
    v2 = ball_rule(s, z0, 2 * R, n)[1].sum()
    return float(np.log2(v2 / v1))


def group_axioms(s: KolmogorovStructure, n: int = 10000, seed: int = 0) -> dict:
    """Maximum absolute errors of associativity, inverses, norm homogeneity and dilation composition."""
    rng = np.random.default_rng(seed)
    a, b, c = (_random_points(s, n, rng) for _ in range(3))
    assoc = np.abs(compose(s, compose(s, a, b), c) - compose(s, a, compose(s, b, c))).max()
    e = np.zeros(s.dim)
    inv = max(np.abs(compose(s, a, invert(s, a)) - e).max(), np.abs(compose(s, invert(s, a), a) - e).max())
    ident = max(np.abs(compose(s, a, e) - a).max(), np.abs(compose(s, e, a) - a).max())
    lam = rng.uniform(0.5, 2.0, size=n)
    mu = rng.uniform(0.5, 2.0, size=n)
    norm = np.abs(hnorm(s, dilate(s, lam, a)) - lam * hnorm(s, a)).max()
    dil = np.abs(dilate(s, lam, dilate(s, mu, a)) - dilate(s, lam * mu, a)).max()
    # delta_lam is a group automorphism
    auto = np.abs(dilate(s, lam, compose(s, a, b)) - compose(s, dilate(s, lam, a), dilate(s, lam, b))).max()
    return {"associativity": float(assoc), "inverse": float(inv), "identity": float(ident),
            "norm_homogeneity": float(norm), "dilation_composition": float(dil),
            "dilation_automorphism": float(auto)}


def structure_info(s: KolmogorovStructure, taus=(0.5, 1.0, 2.0), seed: int = 0) -> dict:
    d = s.to_dict()
    d.update({"Q": s.Q, "Q_plus_2": s.homogeneous_dimension, "exponents": s.exponents.tolist(),
              "unit_ball_volume": s.unit_ball_volume,
              "doubling_exponent": doubling_exponent(s),
              "doubling_constant": 2.0 ** doubling_exponent(s),
              "measure_c0": measure_c0(s, seed=seed),
              "E_samples": {repr(float(t)): exp_neg_BT(s, t).tolist() for t in taus}})
    return d


# ---------------------------------------------------------------- kernel

def covariance_check(k: FrozenKernel, n: int = 100, seed: int = 0, t_max: float = 10.0) -> dict:
    """Van Loan vs quadrature agreement over random t and SPD over a log grid down to 1e-6."""
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, t_max, size=n)
    ts = ts[ts > 0]
    diff, rel = 0.0, 0.0
    for t in ts:
        Cq = covariance_quadrature(k, t)
        d = float(np.abs(Cq - covariance_vanloan(k, t)).max())
        diff, rel = max(diff, d), max(rel, d / float(np.abs(Cq).max()))
    # covariance() raises SingularCovariance when the Cholesky factorisation fails
    spd = all(covariance(k, t).detC > 0 for t in np.geomspace(1e-6, t_max, 60))
    return {"vanloan_max_abs_diff": diff, "vanloan_max_rel_diff": rel, "spd": bool(spd)}


def _whitened_integral(fn, center, Cov, adaptive: bool, rtol: float, half: float = 9.0, n_gl: int = 40) -> float:
    """int fn(x) dx with x = center + L y, L L^T = Cov, over |y_i| <= half.

    The substitution only concentrates the nodes where a Gaussian-like
    integrand lives; it is exact for any fn.  ``adaptive`` selects scipy's
    vectorised adaptive cubature, otherwise a tensor Gauss-Legendre rule.
    """
    L = np.linalg.cholesky(Cov)
    J = float(np.prod(np.diag(L)))
    d = len(center)
    f = lambda y: J * fn(center + y @ L.T)
    if adaptive:
        return float(integrate.cubature(f, np.full(d, -half), np.full(d, half), rtol=rtol, atol=0).estimate)
    x, w = np.polynomial.legendre.leggauss(n_gl)
    Y = np.stack([g.ravel() for g in np.meshgrid(*[half * x] * d, indexing="ij")], axis=-1)
    W = np.prod(np.meshgrid(*[half * w] * d, indexing="ij"), axis=0).ravel()
    return float(W @ f(Y))


def mass(k: FrozenKernel, t: float) -> float:
    """int Gamma_0((x, t), 0) dx.  Adaptive cubature for N <= 2, tensor Gauss-Legendre beyond."""
    s = k.structure
    o = np.zeros(s.dim)
    fn = lambda X: gamma0(k, np.concatenate([X, np.full((len(X), 1), t)], axis=1), o)
    return _whitened_integral(fn, np.zeros(s.N), 2 * covariance(k, t).C, s.N <= 2, 1e-10)


def homogeneity(k: FrozenKernel, n: int = 200, seed: int = 0) -> dict:
    """Relative errors of Gamma_0(delta_lam z, 0) lam^Q = Gamma_0(z, 0) and of the gradient scaling lam^{Q+1}."""
    s = k.structure
    rng = np.random.default_rng(seed)
    z = _random_points(s, n, rng)
    z[:, -1] = rng.uniform(0.2, 1.5, size=n)
    lam = rng.uniform(0.5, 2.0, size=n)
    o = np.zeros(s.dim)
    g1 = gamma0(k, z, o)
    g2 = gamma0(k, dilate(s, lam, z), o) * lam ** s.Q
    d1 = grad0_gamma0(k, z, o)
    d2 = grad0_gamma0(k, dilate(s, lam, z), o) * (lam ** (s.Q + 1))[:, None]
    ok = g1 > 1e-200
    return {"gamma0": _rel(g2[ok], g1[ok]), "grad0": _rel(d2[ok], d1[ok])}


def left_invariance(k: FrozenKernel, n: int = 200, seed: int = 0) -> float:
    s = k.structure
    rng = np.random.default_rng(seed)
    z, zeta, w = (_random_points(s, n, rng) for _ in range(3))
    z[:, -1] = zeta[:, -1] + rng.uniform(0.2, 1.5, size=n)
    a = gamma0(k, z, zeta)
    b = gamma0(k, compose(s, w, z), compose(s, w, zeta))
    return _rel(b, a)


def chapman_kolmogorov(k: FrozenKernel, cases=None) -> float:
    """max rel. error of int Gamma_0((x,t),(y,s)) Gamma_0((y,s),(xi,tau)) dy = Gamma_0((x,t),(xi,tau))."""
    s = k.structure
    if cases is None:
        rng = np.random.default_rng(7)
        cases = []
        for _ in range(3):
            tau = rng.uniform(0, 0.5)
            smid = tau + rng.uniform(0.2, 1.0)
            t = smid + rng.uniform(0.2, 1.0)
            xi = rng.uniform(-.5, .5, s.N)
            # end point within about one standard deviation of the transported start
            Lt = np.linalg.cholesky(2 * covariance(k, t - tau).C)
            x = _apply_E(s, np.asarray(t - tau), xi) + Lt @ rng.uniform(-1, 1, s.N)
            cases.append((np.append(x, t), smid, np.append(xi, tau)))
    worst = 0.0
    for z, smid, zeta in cases:
        z, zeta = np.asarray(z, float), np.asarray(zeta, float)
        # the integrand is a Gaussian in y: combine the two precisions to place the nodes
        m1 = _apply_E(s, np.asarray(smid - zeta[-1]), zeta[:-1])
        P1 = np.linalg.inv(2 * covariance(k, smid - zeta[-1]).C)
        E2 = exp_neg_BT(s, z[-1] - smid)
        P2 = E2.T @ np.linalg.inv(2 * covariance(k, z[-1] - smid).C) @ E2
        Cov = np.linalg.inv(P1 + P2)
        cen = Cov @ (P1 @ m1 + P2 @ np.linalg.solve(E2, z[:-1]))
        Cov = 0.5 * (Cov + Cov.T)

        def fn(Y):
            P = np.concatenate([Y, np.full((len(Y), 1), smid)], axis=1)
            return gamma0(k, z, P) * gamma0(k, P, zeta)
        val = _whitened_integral(fn, cen, Cov, s.N <= 2, 1e-8)
        ref = gamma0(k, z, zeta)
        worst = max(worst, abs(val - ref) / ref)
    return worst


def gradient_fd(k: FrozenKernel, n: int = 50, h: float = 1e-4, seed: int = 0, order: int = 2) -> float:
    """max rel. error of grad0_gamma0 against central differences (order 2 or 4) of gamma0, away from the pole."""
    s = k.structure
    rng = np.random.default_rng(seed)
    z = _random_points(s, n, rng, 0.8)
    z[:, -1] = rng.uniform(0.3, 1.5, size=n)
    o = np.zeros(s.dim)
    an = grad0_gamma0(k, z, o)
    fd = np.empty_like(an)
    for i in range(s.m0):
        e = np.zeros(s.dim)
        e[i] = h
        d1 = gamma0(k, z + e, o) - gamma0(k, z - e, o)
        if order == 2:
            fd[:, i] = d1 / (2 * h)
        else:
            fd[:, i] = (8 * d1 - (gamma0(k, z + 2 * e, o) - gamma0(k, z - 2 * e, o))) / (12 * h)
    scale = np.maximum(np.abs(an).max(axis=1, keepdims=True), 1e-300)
    return float(np.max(np.abs(an - fd) / scale))


def monte_carlo(k: FrozenKernel, start=None, horizon: float = 1.0, n_paths: int = 100_000,
                n_steps: int = 1000, seed: int = 0) -> dict:
    """Endpoint moments of the SDE against E(t) x0 and 2 C(t).

    A component passes when |sample - exact| <= 3 standard errors + |Euler-Maruyama bias|,
    the bias being computed exactly from the discrete recursion.
    """
    s = k.structure
    x0 = np.zeros(s.N)
    x0[0] = 1.0
    if start is not None:
        x0 = np.asarray(start, float)[: s.N]
    ens = sample_paths(k, x0, horizon, n_paths, n_steps, seed)
    mean, cov = ens.mean(), ens.cov()
    m_true = exp_neg_BT(s, horizon) @ x0
    c_true = 2 * covariance(k, horizon).C
    m_em, c_em = euler_moments(k, x0, horizon, n_steps)
    se_m = np.sqrt(np.diag(cov) / n_paths)
    d = np.diag(cov)
    se_c = np.sqrt((np.outer(d, d) + cov ** 2) / n_paths)
    ok_m = np.abs(mean - m_true) <= 3 * se_m + np.abs(m_em - m_true)
    ok_c = np.abs(cov - c_true) <= 3 * se_c + np.abs(c_em - c_true)
    return {"mean": mean.tolist(), "mean_exact": m_true.tolist(), "cov": cov.tolist(),
            "cov_exact": c_true.tolist(), "mean_ok": bool(ok_m.all()), "cov_ok": bool(ok_c.all()),
            "max_mean_z": float(np.max(np.abs(mean - m_true) / se_m)),
            "max_cov_z": float(np.max(np.abs(cov - c_true) / se_c))}


def kernel_check(k: FrozenKernel, n_paths: int = 100_000, n_steps: int = 1000, seed: int = 0) -> dict:
    """Mass, homogeneity, invariance, Chapman-Kolmogorov, gradient and Monte Carlo checks."""
    s = k.structure
    out = {"covariance": covariance_check(k, seed=seed),
           "mass": {repr(t): mass(k, t) for t in (0.25, 1.0, 4.0)},
           "homogeneity": homogeneity(k, seed=seed),
           "left_invariance": left_invariance(k, seed=seed),
           "gradient_fd": gradient_fd(k, seed=seed, order=4)}
    out["chapman_kolmogorov"] = chapman_kolmogorov(k)
    if n_paths:
        out["monte_carlo"] = monte_carlo(k, n_paths=n_paths, n_steps=n_steps, seed=seed)
    out["passed"] = bool(
        out["covariance"]["vanloan_max_rel_diff"] <= 1e-12 and out["covariance"]["spd"]
        and all(abs(m - 1) <= 1e-6 for m in out["mass"].values())
        and max(out["homogeneity"].values()) <= 1e-10 and out["left_invariance"] <= 1e-10
        and out["gradient_fd"] <= 1e-6 and out["chapman_kolmogorov"] <= 1e-4
        and (not n_paths or (out["monte_carlo"]["mean_ok"] and out["monte_carlo"]["cov_ok"])))
    return out


def gamma0_at(k: FrozenKernel, points, zeta=None) -> dict:
    """Gamma_0 and its D0 gradient at points (rows), pole zeta (default origin)."""
    P = np.atleast_2d(np.asarray(points, float))
    o = np.zeros(k.structure.dim) if zeta is None else np.asarray(zeta, float)
    return {"points": P.tolist(), "gamma0": np.atleast_1d(gamma0(k, P, o)).tolist(),
            "grad0": grad0_gamma0(k, P, o).tolist()}


__all__ = ["doubling_exponent", "group_axioms", "structure_info", "covariance_check", "mass", "homogeneity",
           "left_invariance", "chapman_kolmogorov", "gradient_fd", "monte_carlo", "kernel_check", "gamma0_at"]
