"""CPU-frequency allocation at one computing node.

Minimizes total processing latency sum(load_k / f_k) under the node's
frequency budget and per-VUE latency caps. The problem is separable and
convex, so the exact solution is closed-form: frequencies proportional
to sqrt(load), with cap-bound VUEs pinned at their minimum frequency and
the square-root rule re-applied to the remainder.
"""
from __future__ import annotations

from dataclasses import dataclass


import numpy as np


class InfeasibleCapsError(ValueError):
    """Caps cannot all be met within the budget; carries the minimum needs."""

    def __init__(self, min_required: np.ndarray):
        self.min_required = min_required
        super().__init__("latency caps require more than the frequency budget")


class OracleTooLargeError(ValueError):
    """Grid search refused: instance exceeds the oracle's size limits."""


@dataclass
class FreqProblem:
    loads: np.ndarray                       # CPU cycles per VUE
    budget: float                           # node frequency budget, cycles/s
    caps: np.ndarray | None = None          # per-VUE latency caps, seconds

    def __post_init__(self):
        self.loads = np.asarray(self.loads, dtype=float)
        if self.caps is None:
            self.caps = np.full(self.loads.shape, np.inf)
        else:
            self.caps = np.asarray(self.caps, dtype=float)
        if np.any(self.loads < 0):
            raise ValueError("loads must be nonnegative")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if np.any(self.caps <= 0):
            raise ValueError("caps must be positive")

    def min_required(self) -> np.ndarray:
        """Frequency each VUE needs to exactly meet its cap."""
        return np.where(self.loads > 0, self.loads / self.caps, 0.0)

    def objective(self, freqs: np.ndarray) -> float:
        active = self.loads > 0
        f = freqs[active]
        if np.any(f <= 0):
            return float("inf")
        return float((self.loads[active] / f).sum())


def allocate_frequencies(problem: FreqProblem) -> np.ndarray:
    """Exact latency-minimal split of the budget, respecting caps.

    Raises InfeasibleCapsError when the caps alone need more than the
    budget. The whole budget is spent whenever any load is positive.
    """
    n = len(problem.loads)
    freqs = np.zeros(n)
    active = np.flatnonzero(problem.loads > 0)
    if active.size == 0:
        return freqs
    required = problem.min_required()
    if required[active].sum() > problem.budget * (1.0 + 1e-12):
        raise InfeasibleCapsError(required)

    pinned: set[int] = set()
    while True:
        free = [k for k in active if k not in pinned]
        budget_left = problem.budget - sum(required[k] for k in pinned)
        if not free:
            break
        roots = np.sqrt(problem.loads[free])
        trial = budget_left * roots / roots.sum()
        newly = [k for k, f in zip(free, trial) if f < required[k]]
        if not newly:
            for k, f in zip(free, trial):
                freqs[k] = f
            break
        pinned.update(newly)
    for k in pinned:
        freqs[k] = required[k]
    return freqs


def grid_search_oracle(problem: FreqProblem, resolution: float = 1e-3) -> np.ndarray:
    """Brute-force simplex search over frequency splits (test oracle).

    Only the positive-load VUEs span grid dimensions; the last one takes
    the leftover budget since the objective always wants it spent.
    """
    active = np.flatnonzero(problem.loads > 0)
    if active.size > 4:
        raise OracleTooLargeError("grid oracle supports at most 4 loaded VUEs")
    n = len(problem.loads)
    freqs = np.zeros(n)
    if active.size == 0:
        return freqs
    required = problem.min_required()
    if required[active].sum() > problem.budget * (1.0 + 1e-12):
        raise InfeasibleCapsError(required)
    if active.size == 1:
        freqs[active[0]] = problem.budget
        return freqs

    steps = int(round(1.0 / resolution))
    if steps ** (active.size - 1) > 2e7:
        raise OracleTooLargeError("grid too fine for this many VUEs")
    ticks = np.linspace(0.0, problem.budget, steps + 1)
    grids = np.meshgrid(*([ticks] * (active.size - 1)), indexing="ij")
    head = np.stack([g.ravel() for g in grids], axis=1)
    tail = problem.budget - head.sum(axis=1)
    f = np.concatenate([head, tail[:, None]], axis=1)   # (points, active)
    ok = np.all(f > 0, axis=1)
    loads = problem.loads[active]
    caps = problem.caps[active]
    with np.errstate(divide="ignore", invalid="ignore"):
        lat = loads[None, :] / f
        ok &= np.all(lat <= caps[None, :] * (1.0 + 1e-12), axis=1)
        obj = np.where(ok, lat.sum(axis=1), np.inf)
    best = int(np.argmin(obj))
    if not np.isfinite(obj[best]):
        raise InfeasibleCapsError(required)
    freqs[active] = f[best]
    return freqs
