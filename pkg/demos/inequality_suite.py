"""The inequality harness on a small suite at two grid levels.

Each check evaluates the two sides of an interior estimate without the
unknown constant and reports lhs/rhs per level.  A verdict is "stable" when
that ratio moves by at most a factor 2 under refinement.
"""

from ultrapar.harness import SuiteConfig, run_suite

cfg = SuiteConfig(levels=(17, 33), members=("caloric_quadratic", "frozen_bump", "sinusoid", "homog_pole"))
for r in run_suite(cfg):
    refine = ", ".join(f"{x:.3g}" for x in r.refinement)
    print(f"{r.check:15s} {r.member:18s} {r.verdict:10s} ratios [{refine}]")
