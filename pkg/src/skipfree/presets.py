"""Named reference models and a random-model generator for property tests.

Expected regimes (numerical evidence at the default window):

=================  ==========================================  =================
preset             rates                                       regime
=================  ==========================================  =================
pure-death         down 1, no up, no killing (chain Y)         Continuum
single-kill-site   down 1, no up, c_1 = 1                      Continuum
bd-drift-down      down 2, up 1 (one step), no killing (Y)     Continuum
quadratic-death    down i^2, up 1, c_u = 2^-u                  Unique
linear-killing     down 1, up 1, c_n = n                       UniqueLargeKilling
geometric-kill     down 1, no up, c_u = 2^-u                   Continuum
=================  ==========================================  =================
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .model import SingleDeathModel
from .rates import Constant, ExplicitUp, Geometric, Jumps, NoUp, Power, Sites, Table

PRESETS = {
    "pure-death": lambda: SingleDeathModel(Constant(1.0), NoUp(), Constant(0.0), "pure-death", "Y"),
    "single-kill-site": lambda: SingleDeathModel(Constant(1.0), NoUp(), Sites(((1, 1.0),)), "single-kill-site"),
    "bd-drift-down": lambda: SingleDeathModel(
        Constant(2.0), Jumps(((1, Constant(1.0)),)), Constant(0.0), "bd-drift-down", "Y"
    ),
    "quadratic-death": lambda: SingleDeathModel(
        Power(1.0, 2.0), Jumps(((1, Constant(1.0)),)), Geometric(1.0, 0.5), "quadratic-death"
    ),
    "linear-killing": lambda: SingleDeathModel(
        Constant(1.0), Jumps(((1, Constant(1.0)),)), Power(1.0, 1.0), "linear-killing"
    ),
    "geometric-kill": lambda: SingleDeathModel(Constant(1.0), NoUp(), Geometric(1.0, 0.5), "geometric-kill"),
}

EXPECTED_REGIME = {
    "pure-death": "Continuum",
    "single-kill-site": "Continuum",
    "bd-drift-down": "Continuum",
    "quadratic-death": "Unique",
    "linear-killing": "UniqueLargeKilling",
    "geometric-kill": "Continuum",
}


def preset(name: str) -> SingleDeathModel:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def random_model(rng: np.random.Generator, N: int, max_jump: int = 4, low: float = 0.1, high: float = 5.0,
                 killing: bool = True, up_prob: float = 0.7) -> SingleDeathModel:
    """A model with explicit rates on ``1..N``: down rates and killing uniform
    in ``[low, high]``, up-jumps of size ``<= max_jump`` present with
    probability ``up_prob`` each (targets may exceed ``N``)."""
    down = Table(tuple(rng.uniform(low, high, N)))
    rows = []
    for i in range(1, N + 1):
        pairs = tuple((i + k, float(rng.uniform(low, high))) for k in range(1, max_jump + 1) if rng.random() < up_prob)
        if pairs:
            rows.append((i, pairs))
    kill = Table(tuple(rng.uniform(low, high, N))) if killing else Table(tuple(np.zeros(N)))
    return SingleDeathModel(down, ExplicitUp(tuple(rows)), kill, "random", "X" if killing else "Y")


def random_weight(rng: np.random.Generator, N: int, high: float = 2.0) -> Table:
    return Table(tuple(rng.uniform(0.0, high, N)))
