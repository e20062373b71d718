"""Cross-checks of the recursions against the dense reference computations.

Used by ``skipfree verify``; the test suite runs the same comparisons at the
full corpus size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle
from .exitlaws import ExitQuery, downcross_laplace, occupation_transform, upcross_laplace
from .model import TruncationWindow
from .potential import harmonic_h, potential_table
from .presets import preset, random_model, random_weight
from .qsd import decay_parameter, doob_transform, qsd_candidate, stationarity_residual
from .simulate import tv_distance


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "worst": self.worst, "tol": self.tol, "detail": self.detail}


def rel_err(a, b) -> float:
    """Largest entrywise ``|a - b| / |b|`` (``|a - b|`` where ``b == 0``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    scale = np.abs(b)
    out = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
    return float(np.max(out)) if out.size else 0.0


def random_corpus(seed: int, n_models: int, n_max: int = 30, min_level: int = 3):
    """``(model, weight, N)`` triples as used by the randomized checks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_models):
        N = int(rng.integers(min_level, n_max + 1))
        m = random_model(rng, N, killing=bool(rng.random() < 0.5))
        out.append((m, random_weight(rng, N), N))
    return out


def poisson_error(m, omega, N) -> float:
    t = potential_table(m, omega, N)
    F = oracle.poisson_solve(m, omega, N)
    iu = np.triu_indices(N + 1, 1)
    return rel_err(t.w[iu], F[iu])


def exit_errors(m, omega, N, a=0):
    """Worst relative errors of the three exit functionals and the ``w = 0``
    complement defect, over all start states (and occupation targets)."""
    ex = oracle.exit_oracle(m, omega, a, N)
    down = up = occ = comp = 0.0
    for i in range(a + 1, N):
        q = ExitQuery(a, i, N, omega)
        down = max(down, rel_err(downcross_laplace(m, q), ex.down[i]))
        up = max(up, rel_err(upcross_laplace(m, q), ex.up[i]))
        for j in range(a + 1, N):
            occ = max(occ, rel_err(occupation_transform(m, ExitQuery(a, i, N, omega, j)).value, ex.occupation[i, j]))
        q0 = ExitQuery(a, i, N, 0.0)
        comp = max(comp, abs(downcross_laplace(m, q0) + upcross_laplace(m, q0) - 1.0))
    return {"down": down, "up": up, "occupation": occ, "complement": comp}


def semigroup_errors(m, N=60, times=(0.5, 1.0, 2.0), window=None):
    """Harmonicity ``P(t) h = h`` and the Doob identity ``pbar = p h(j)/h(i)``.

    Rows near the truncation boundary feel the kill-on-exit of the dense
    chain, so only rows ``1..N/2`` are compared.
    """
    win = window or TruncationWindow(N)
    h = harmonic_h(m, win).values
    dm = doob_transform(m, win)
    rows = slice(1, N // 2)
    harm = doob = 0.0
    for t in times:
        P = oracle.transition_matrix(m, N, t)
        harm = max(harm, float(np.max(np.abs(P @ h - h)[rows])))
        Pd = oracle.transition_matrix(dm.model, N - 1, t)
        pbar = P[:N, :N] * h[None, :N] / h[:N, None]
        doob = max(doob, float(np.max(np.abs(Pd[rows, rows] - pbar[rows, rows]))))
    return harm, doob


def run_checks(seed: int = 0, n_models: int = 10) -> list:
    results = []

    corpus = random_corpus(seed, n_models)
    worst = max(poisson_error(*c) for c in corpus)
    results.append(CheckResult("poisson_equation", worst <= 1e-10, worst, 1e-10, f"{n_models} random models"))

    errs = [exit_errors(*c) for c in corpus]
    worst = max(max(e["down"], e["up"], e["occupation"]) for e in errs)
    results.append(CheckResult("two_sided_exit", worst <= 1e-8, worst, 1e-8, f"{n_models} random models"))
    worst = max(e["complement"] for e in errs)
    results.append(CheckResult("exit_complement", worst <= 1e-12, worst, 1e-12, "downcross + upcross = 1 at w = 0"))

    m = preset("quadratic-death")
    win = TruncationWindow(400)
    lam = decay_parameter(m, win)
    ep = oracle.principal_eigenpair(m, 100)
    ref = decay_parameter(m, TruncationWindow(100, schedule=(100,)))
    worst = abs(ref.lambda0 - ep.rate) / ep.rate
    results.append(CheckResult("decay_vs_eigenpair", worst <= 1e-8, worst, 1e-8, "quadratic-death, N = 100"))

    nu = qsd_candidate(m, lam.lambda0, win)
    res = stationarity_residual(m, nu, win)
    results.append(CheckResult("qsd_stationarity", res <= 1e-6, res, 1e-6, "quadratic-death at lambda_0, N = 400"))
    tv = tv_distance(nu.probs[:100], ep.vector)
    results.append(CheckResult("qsd_vs_eigenvector", tv <= 1e-6, tv, 1e-6, "TV to the oracle left vector"))

    for name in ("single-kill-site", "geometric-kill"):
        harm, doob = semigroup_errors(preset(name))
        results.append(CheckResult(f"harmonic_semigroup[{name}]", harm <= 1e-6, harm, 1e-6, "t in {0.5, 1, 2}"))
        results.append(CheckResult(f"doob_semigroup[{name}]", doob <= 1e-6, doob, 1e-6, "t in {0.5, 1, 2}"))

    golden = [
        (harmonic_h(preset("single-kill-site"), TruncationWindow(60))(5), 0.5),
        (potential_table(preset("pure-death"), 1.0, 3).w[0, 3], 4.0),
        (downcross_laplace(preset("pure-death"), ExitQuery(0, 2, 5, 1.0)), 0.25),
    ]
    worst = max(abs(a - b) for a, b in golden)
    results.append(CheckResult("golden_values", worst <= 1e-12, worst, 1e-12, "closed-form values"))
    return [r if math.isfinite(r.worst) else CheckResult(r.name, False, r.worst, r.tol, r.detail) for r in results]
