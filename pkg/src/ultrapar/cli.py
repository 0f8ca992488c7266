"""Command line entry point.

    ultrapar {structure-info, kernel-eval, kernel-check, solve, verify, sweep}
             [--config run.json] [--out DIR] [--threads N] [--verbose]

Exit codes: 0 success, 2 configuration error, 3 unknown check, 4 numerical
failure (reports written so far are kept).  Every run writes manifest.json,
listing each produced file with its sha256.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics
from .coefficients import gaussian_bump, make_coefficient
from .config import RunConfig, load_config
from .errors import ConfigParse, UltraparError, UnknownCheck
from .harness import _data_affine, build_suite, run_suite, write_reports
from .kernel import FrozenKernel
from .solver import CutoffSpec, ProblemSpec, solve_forward, solve_frozen_convolution, weak_residual

log = logging.getLogger("ultrapar")

COMMANDS = ("structure-info", "kernel-eval", "kernel-check", "solve", "verify", "sweep")
EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalFailure(UltraparError):
    """A command finished but some requested result could not be produced."""


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


class Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def text(self, rel: str, content: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content)
        self.files.append(p)
        return p

    def add(self, paths):
        self.files.extend(Path(p) for p in paths)

    def manifest(self, command: str, status: int) -> Path:
        entries = []
        for p in sorted(set(self.files)):
            entries.append({"path": str(p.relative_to(self.root)),
                            "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
                            "bytes": p.stat().st_size})
        p = self.root / "manifest.json"
        p.write_text(_dump({"command": command, "exit_status": status, "files": entries}))
        return p


# ---------------------------------------------------------------- commands

def cmd_structure_info(cfg: RunConfig, out: Outputs, args) -> None:
    s = cfg.structure
    info = diagnostics.structure_info(s, seed=cfg.seed)
    info["group_axioms"] = diagnostics.group_axioms(s, seed=cfg.seed)
    out.text("structure.json", _dump({"config": cfg.resolved(), "structure": info}))
    print(f"Q = {s.Q}, Q+2 = {s.homogeneous_dimension}, exponents = {s.exponents.tolist()}")
    print(f"doubling exponent = {info['doubling_exponent']:.12f}, doubling constant = {info['doubling_constant']:.6g}")
    for tau, E in info["E_samples"].items():
        print(f"E({tau}) = {E}")


def cmd_kernel_eval(cfg: RunConfig, out: Outputs, args) -> None:
    k = FrozenKernel(cfg.structure)
    kc = cfg.raw["kernel"]
    res = diagnostics.gamma0_at(k, kc["points"], kc.get("zeta"))
    out.text("kernel_eval.json", _dump({"config": cfg.resolved(), "kernel_eval": res}))
    for p, g, d in zip(res["points"], res["gamma0"], res["grad0"]):
        print(f"z = {p}: Gamma0 = {g!r}, D0 Gamma0 = {d}")


def cmd_kernel_check(cfg: RunConfig, out: Outputs, args) -> None:
    k = FrozenKernel(cfg.structure)
    kc = cfg.raw["kernel"]
    res = diagnostics.kernel_check(k, n_paths=int(kc["n_paths"]), n_steps=int(kc["n_steps"]), seed=cfg.seed)
    out.text("kernel_check.json", _dump({"config": cfg.resolved(), "kernel_check": res}))
    print(f"kernel checks {'passed' if res['passed'] else 'FAILED'}")
    if not res["passed"]:
        raise NumericalFailure("kernel self-checks failed; see kernel_check.json")


def _problem(cfg: RunConfig) -> ProblemSpec:
    s = cfg.structure
    src = cfg.raw["sources"]
    g = gaussian_bump(**src["g"]) if src.get("g") else None
    f = [gaussian_bump(**fi) for fi in src["f"]] if src.get("f") else None
    a = make_coefficient(cfg.raw["coefficient"]["name"], s.m0, **cfg.raw["coefficient"].get("params", {}))
    data = _data_affine if cfg.raw["data"] == "affine" else None
    return ProblemSpec(s, cfg.lower, cfg.upper, cfg.shape, a, g, f, data, "u")


def cmd_solve(cfg: RunConfig, out: Outputs, args) -> None:
    ps = _problem(cfg)
    method = cfg.raw["solver"].get("method", "forward")
    t0 = time.perf_counter()
    if method == "frozen":
        tmpl = ps.template()
        P = tmpl.points()
        G = tmpl.with_values(ps.g_values(P), name="g")
        F = [tmpl.with_values(v, name=f"f{i + 1}") for i, v in enumerate(ps.f_values(P))]
        u = solve_frozen_convolution(FrozenKernel(cfg.structure), G, F)
    else:
        u = solve_forward(ps, cfg.solver_config())
    log.info("solve took %.2f s", time.perf_counter() - t0)
    if not np.all(np.isfinite(u.values)):
        raise NumericalFailure("solution contains non-finite values")
    c = 0.5 * (cfg.lower + cfg.upper)
    psi = CutoffSpec(tuple(c), 0.4, 0.9, scale=tuple(0.5 * (cfg.upper - cfg.lower)))
    summary = {"method": method, "shape": list(u.shape), "min": float(u.values.min()),
               "max": float(u.values.max()), "l2": float(np.sqrt(np.sum(u.weights * u.values ** 2))),
               "relative_weak_residual": weak_residual(ps, u, psi, relative=True),
               "provenance": u.provenance}
    out.add([u.save(out.root / "solution.ugf")])
    out.text("solve.json", _dump({"config": cfg.resolved(), "solve": summary}))
    print(f"solution {u.shape} written to {out.root / 'solution.ugf'}")


def _verify(cfg: RunConfig, out: Outputs, levels, threads: int, prefix: str = "") -> list:
    sc = cfg.suite_config(levels, threads)
    t0 = time.perf_counter()
    suite = build_suite(sc)
    residuals = suite.compute_residuals()
    reports = run_suite(sc, suite)
    log.info("suite on levels %s took %.1f s", list(sc.levels), time.perf_counter() - t0)
    extra = {"config": cfg.resolved(), "levels": list(sc.levels), "weak_residuals": residuals}
    out.add(write_reports(reports, out.root / prefix if prefix else out.root, extra))
    return reports


def _summarize(reports) -> dict:
    counts: dict = {}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    return counts


def cmd_verify(cfg: RunConfig, out: Outputs, args) -> None:
    reports = _verify(cfg, out, cfg.levels, args.threads)
    counts = _summarize(reports)
    print(f"{len(reports)} reports: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())))
    if counts.get("failed"):
        raise NumericalFailure(f"{counts['failed']} check cases failed")


def cmd_sweep(cfg: RunConfig, out: Outputs, args) -> None:
    rows, failed = [], 0
    for i, levels in enumerate(cfg.raw["sweep"]["levels"]):
        reports = _verify(cfg, out, levels, args.threads, prefix=f"sweep_{i}")
        counts = _summarize(reports)
        failed += counts.get("failed", 0)
        rows.append({"levels": list(levels), "verdicts": counts})
        print(f"levels {levels}: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())))
    out.text("sweep.json", _dump({"config": cfg.resolved(), "sweep": rows}))
    if failed:
        raise NumericalFailure(f"{failed} check cases failed across the sweep")


HANDLERS = {"structure-info": cmd_structure_info, "kernel-eval": cmd_kernel_eval,
            "kernel-check": cmd_kernel_check, "solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultrapar", description="Kolmogorov-operator toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", default=None, help="JSON run configuration (defaults when omitted)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for independent check cases")
    ap.add_argument("--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except UnknownCheck as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK
    except ConfigParse as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(args.out)
    status = EXIT_OK
    try:
        HANDLERS[args.command](cfg, out, args)
    except UnknownCheck as e:
        print(f"error: {e}", file=sys.stderr)
        status = EXIT_CHECK
    except ConfigParse as e:
        print(f"error: {e}", file=sys.stderr)
        status = EXIT_CONFIG
    except (UltraparError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        status = EXIT_NUMERIC
    out.manifest(args.command, status)
    return status


def main() -> None:
    sys.exit(run())

