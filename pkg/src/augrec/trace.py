"""Iteration records and regularization schedules shared by both solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LambdaSchedule", "SolverTrace", "SolverDivergence"]


class SolverDivergence(FloatingPointError):
    """Raised when the energy becomes NaN or infinite."""


@dataclass(frozen=True)
class LambdaSchedule:
    """Geometric continuation ``start * factor**((s-1)//every)``, floored at ``target``.

    A schedule with ``start <= target`` is constant.
    """

    start: float
    target: float
    factor: float = 0.5
    every: int = 20

    def __post_init__(self):
        if not self.target > 0:
            raise ValueError("target lambda must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.every < 1:
            raise ValueError("every must be >= 1")

    @classmethod
    def constant(cls, lam: float) -> "LambdaSchedule":
        return cls(lam, lam)

    def value(self, s: int) -> float:
        if self.start <= self.target:
            return self.target
        return max(self.start * self.factor ** ((s - 1) // self.every), self.target)

    def at_target(self, s: int) -> bool:
        return self.value(s) == self.target


@dataclass
class SolverTrace:
    """Per-iteration diagnostics of an alternating-minimization run.

    Attributes
    ----------
    lam : list of float
        Regularization weight used at iteration s.
    energy : list of float
        Surrogate energy after iteration s.
    energy_start : list of float
        Energy of the previous iterate evaluated with the current ``lam``; equal
        to ``energy[s-1]`` whenever ``lam`` did not change.
    x_rel_change : list of float
        ``||x_s - x_{s-1}|| / ||x_{s-1}||`` (absolute change when the
        denominator is zero).
    x_step, w_step : list of float
        Absolute changes of the two blocks.
    residual : list of float
        Criticality residual of the new iterate.
    cg_iterations, cg_converged, backtracks : list
        Inner solver bookkeeping.
    termination : str
        ``"tolerance"`` or ``"maxit"``.
    """

    lam: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    energy_start: list = field(default_factory=list)
    x_rel_change: list = field(default_factory=list)
    x_step: list = field(default_factory=list)
    w_step: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    cg_converged: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    termination: str = ""

    @property
    def iterations(self) -> int:
        return len(self.energy)

    @property
    def converged(self) -> bool:
        return self.termination == "tolerance"

    @property
    def cg_failures(self) -> int:
        return sum(not c for c in self.cg_converged)

    def record(self, **values):
        for key, val in values.items():
            getattr(self, key).append(val)

    def monotone_violations(self, slack: float = 1e-10) -> list:
        """Iterations whose energy exceeds the previous one by more than ``slack``."""
        e = np.asarray(self.energy)
        e0 = np.asarray(self.energy_start)
        return [int(i) + 1 for i in np.flatnonzero(e > e0 + slack)]

    def tail_fraction(self, frac: float = 0.1) -> float:
        """Share of ``sum(||dx||^2 + ||dw||^2)`` contributed by the last ``frac`` of iterations."""
        g = np.asarray(self.x_step) ** 2 + np.asarray(self.w_step) ** 2
        total = g.sum()
        if total == 0:
            return 0.0
        m = max(1, int(np.ceil(frac * g.size)))
        return float(g[-m:].sum() / total)

    def as_arrays(self) -> dict:
        keys = ["lam", "energy", "energy_start", "x_rel_change", "x_step", "w_step", "residual"]
        return {k: np.asarray(getattr(self, k), dtype=float) for k in keys}
