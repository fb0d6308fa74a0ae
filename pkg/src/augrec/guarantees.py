"""Executable recovery guarantees: RIP constants, NSP probing and error bounds.

Exact RIP constants are computed by support enumeration for small problems.
The randomized estimator and the NSP probes are one-sided: they can only
produce lower bounds on the RIP constant and refutations of the null-space
property, never certificates.

Report format
-------------
:meth:`GuaranteeReport.to_lines` writes one tab-separated record per line;
the first field names the record type and the remaining fields follow in
this order::

    delta       level  value  exact(0|1)  probes
    theta       delta  theta
    constants   C1  C2  C3  C4  C5  C6  vacuous(0|1)
    beta_rule   alpha  beta  satisfied(0|1)  beta_admissible
    nsp         verdict  probes  lhs  rhs  note
    bound       instance  bound  lhs  rhs  satisfied(1|0|NA)

Lines starting with ``#`` are comments. Missing numeric values are written
as ``NA``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .linalg import DenseMatrix, EntrySampler, MeasurementOp

__all__ = [
    "DELTA_EXACT",
    "DELTA_STABLE",
    "BudgetExceeded",
    "RipEstimate",
    "rip_delta_exact",
    "rip_delta_randomized",
    "theta",
    "admissible_beta",
    "StabilityConstants",
    "stability_constants",
    "NspVerdict",
    "nsp_probe_vec",
    "nsp_probe_mat",
    "BoundCheck",
    "verify_error_bound",
    "GuaranteeReport",
]

DELTA_EXACT = 0.4663
DELTA_STABLE = 0.4378
ENUMERATION_BUDGET = 10**6
_CHUNK = 4096


class BudgetExceeded(ValueError):
    """Support enumeration would exceed the configured budget."""


class RipEstimate(NamedTuple):
    delta: float
    level: int
    exact: bool
    probes: int
    support: tuple


def _normalized(A):
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A / norms


def rip_delta_exact(A, k: int, normalize: bool = False, budget: int = ENUMERATION_BUDGET) -> RipEstimate:
    """Restricted isometry constant of order ``k`` by enumerating all supports.

    For every support ``S`` of size ``k`` the extreme eigenvalues of
    ``A_S^T A_S - I`` are computed; the constant is the largest magnitude seen.
    """
    A = _normalized(A) if normalize else np.asarray(A, dtype=float)
    p = A.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}]")
    count = math.comb(p, k)
    if count > budget:
        raise BudgetExceeded(f"C({p}, {k}) = {count} supports exceeds budget {budget}; use rip_delta_randomized")
    G = A.T @ A
    eye = np.eye(k)
    best, best_support = -1.0, ()
    combos = itertools.combinations(range(p), k)
    while True:
        chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        S = chunk.reshape(-1, k)
        sub = G[S[:, :, None], S[:, None, :]] - eye
        ev = np.linalg.eigvalsh(sub)
        dev = np.maximum(np.abs(ev[:, 0]), np.abs(ev[:, -1]))
        i = int(np.argmax(dev))
        if dev[i] > best:
            best, best_support = float(dev[i]), tuple(int(j) for j in S[i])
    return RipEstimate(best, k, True, count, best_support)


def rip_delta_randomized(A_or_op, k: int, probes: int, seed=0, normalize: bool = False) -> RipEstimate:
    """Lower bound on the RIP constant from random probes.

    Vector case (array or vector-domain :class:`DenseMatrix`): each probe draws
    a uniformly random support of size ``k`` and evaluates the worst unit
    vector on it, i.e. the extreme eigenvalue of ``A_S^T A_S - I``.

    Matrix case (operator with a 2-D domain): each probe draws ``X = P Q^T`` of
    rank ``k`` with Gaussian factors, scaled to unit Frobenius norm, and
    evaluates ``| ||A(X)||^2 - 1 |``.

    Probes are drawn in fixed-size blocks from one stream, so for a fixed seed
    the bound is nondecreasing in ``probes``.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    op = A_or_op
    if isinstance(op, np.ndarray):
        op = DenseMatrix(op)
    if len(op.domain_shape) == 1:
        if not isinstance(op, DenseMatrix):
            raise TypeError("vector-domain probing needs an explicit matrix")
        A = _normalized(op.A) if normalize else op.A
        return _probe_vec(A, k, probes, rng)
    return _probe_mat(op, k, probes, rng)


def _probe_vec(A, k, probes, rng):
    p = A.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}]")
    eye = np.eye(k)
    best, best_support = 0.0, ()
    done = 0
    while done < probes:
        keys = rng.random((_CHUNK, p))
        S = np.sort(np.argpartition(keys, k - 1, axis=1)[:, :k], axis=1)
        m = min(_CHUNK, probes - done)
        S = S[:m]
        AS = A[:, S].transpose(1, 0, 2)
        ev = np.linalg.eigvalsh(AS.transpose(0, 2, 1) @ AS - eye)
        dev = np.maximum(np.abs(ev[:, 0]), np.abs(ev[:, -1]))
        i = int(np.argmax(dev))
        if dev[i] > best:
            best, best_support = float(dev[i]), tuple(int(j) for j in S[i])
        done += m
    return RipEstimate(best, k, False, probes, best_support)


def _probe_mat(op, r, probes, rng):
    n1, n2 = op.domain_shape
    if not 1 <= r <= min(n1, n2):
        raise ValueError(f"rank must lie in [1, {min(n1, n2)}]")
    best = 0.0
    block = 64
    done = 0
    while done < probes:
        P = rng.standard_normal((block, n1, r))
        Q = rng.standard_normal((block, n2, r))
        for j in range(min(block, probes - done)):
            X = P[j] @ Q[j].T
            X /= np.linalg.norm(X)
            y = op.apply(X)
            best = max(best, abs(float(y @ y) - 1.0))
        done += min(block, probes - done)
    return RipEstimate(best, r, False, probes, ())


def theta(delta: float) -> float:
    """Null-space concentration ratio as a function of the RIP constant of order 2k."""
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    num = 4.0 * (1.0 + 5.0 * delta - 4.0 * delta * delta)
    den = (1.0 - delta) * (32.0 - 25.0 * delta)
    return math.sqrt(num / den)


def admissible_beta(alpha: float, delta: float) -> float:
    """Largest ``beta`` with ``(1 + alpha beta) theta(delta) <= 1``."""
    return (1.0 / theta(delta) - 1.0) / alpha


class StabilityConstants(NamedTuple):
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    C6: float
    theta: float
    delta: float
    vacuous: bool


def stability_constants(alpha: float, beta: float, delta: float) -> StabilityConstants:
    """Closed-form constants of the cone inequality and the stable-recovery bounds.

    When ``C1 * theta(delta) >= 1`` the bounds carry no information; the
    constants C3..C6 are then reported as ``inf`` and ``vacuous`` is set.
    """
    ab = alpha * beta
    if ab >= 1:
        raise ValueError(f"alpha * beta must be < 1, got {ab}")
    th = theta(delta)
    c1 = (1.0 + ab) / (1.0 - ab)
    c2 = 2.0 / (1.0 - ab)
    q = 1.0 - c1 * th
    if q <= 0:
        inf = math.inf
        return StabilityConstants(c1, c2, inf, inf, inf, inf, th, delta, True)
    sq = math.sqrt(1.0 - delta)
    base = (1.0 - delta) * (32.0 - 25.0 * delta)
    c3 = 2.0 * math.sqrt(2.0) * (1.0 + c1) / (sq * q)
    c4 = (1.0 + th) * c2 / q
    c5 = 2.0 / sq * (4.0 * c1 / q * math.sqrt((2.0 - delta) / base) + 1.0)
    c6 = 2.0 * c2 / q * math.sqrt(2.0 * (2.0 - delta) / base)
    return StabilityConstants(c1, c2, c3, c4, c5, c6, th, delta, False)


@dataclass
class NspVerdict:
    """Outcome of null-space probing.

    ``refuted`` is exact when true (the witness violates the inequality);
    ``not-refuted`` only means no probe found a violation.
    """

    refuted: bool
    probes: int
    vacuous: bool = False
    witness: np.ndarray | None = None
    support: tuple = ()
    lhs: float = math.nan
    rhs: float = math.nan
    note: str = ""

    @property
    def verdict(self) -> str:
        return "refuted-with-witness" if self.refuted else "not-refuted"


def nsp_violation_vec(h, k: int, alpha: float, beta: float):
    """Both sides of ``(1 + alpha beta) ||h_S||_1 <= ||h_Sbar||_1`` for the top-k support of ``h``."""
    a = np.abs(np.asarray(h, dtype=float))
    S = np.argsort(-a, kind="stable")[:k]
    mask = np.zeros(a.size, dtype=bool)
    mask[S] = True
    return (1.0 + alpha * beta) * a[mask].sum(), a[~mask].sum(), tuple(int(i) for i in np.sort(S))


def nsp_violation_mat(H, r: int, alpha: float, beta: float):
    """Both sides of ``(1 + alpha beta) sum_{i<=r} sigma_i(H) <= sum_{i>r} sigma_i(H)``."""
    s = np.linalg.svd(np.asarray(H, dtype=float), compute_uv=False)
    return (1.0 + alpha * beta) * s[:r].sum(), s[r:].sum()


def nsp_probe_vec(A, k: int, alpha: float, beta: float, probes: int = 1000, seed=0) -> NspVerdict:
    """Search the null space of ``A`` for a violation of the augmented NSP of order ``k``.

    Each probe is a random unit combination of an orthonormal null-space basis;
    the support tested is the ``k`` largest magnitudes of the probe, the worst
    choice for the inequality.
    """
    A = np.asarray(A, dtype=float)
    N = scipy.linalg.null_space(A)
    if N.shape[1] == 0:
        return NspVerdict(False, 0, vacuous=True, note="trivial null space")
    rng = np.random.Generator(np.random.Philox(seed))
    for i in range(probes):
        c = rng.standard_normal(N.shape[1])
        h = N @ (c / np.linalg.norm(c))
        lhs, rhs, S = nsp_violation_vec(h, k, alpha, beta)
        if lhs > rhs:
            return NspVerdict(True, i + 1, witness=h, support=S, lhs=lhs, rhs=rhs)
    return NspVerdict(False, probes, note=f"no violation in {probes} probes")


def _null_sampler(op: MeasurementOp):
    n1, n2 = op.domain_shape
    if isinstance(op, EntrySampler):
        free = ~op.mask
        if not free.any():
            return None
        return lambda rng: np.where(free, rng.standard_normal((n1, n2)), 0.0)
    if isinstance(op, DenseMatrix):
        N = scipy.linalg.null_space(op.A)
        if N.shape[1] == 0:
            return None
        return lambda rng: (N @ rng.standard_normal(N.shape[1])).reshape(n1, n2)
    raise TypeError(f"unsupported operator {type(op).__name__}")


def nsp_probe_mat(op: MeasurementOp, r: int, alpha: float, beta: float, probes: int = 1000, seed=0) -> NspVerdict:
    """Spectral analogue of :func:`nsp_probe_vec` over random null-space matrices."""
    sample = _null_sampler(op)
    if sample is None:
        return NspVerdict(False, 0, vacuous=True, note="trivial null space")
    rng = np.random.Generator(np.random.Philox(seed))
    for i in range(probes):
        H = sample(rng)
        H /= np.linalg.norm(H)
        lhs, rhs = nsp_violation_mat(H, r, alpha, beta)
        if lhs > rhs:
            return NspVerdict(True, i + 1, witness=H, lhs=lhs, rhs=rhs)
    return NspVerdict(False, probes, note=f"no violation in {probes} probes")


class BoundCheck(NamedTuple):
    instance: str
    bound: str
    lhs: float
    rhs: float
    satisfied: bool | None


# absolute slack for comparisons that are tight by construction (exact recovery)
_BOUND_ATOL = 1e-12


def verify_error_bound(
    truth,
    estimate,
    noise_norm: float,
    k: int,
    constants: StabilityConstants,
    delta: float | None = None,
    instance: str = "",
) -> list:
    """Evaluate the a-posteriori error bounds for one recovery.

    Vectors are checked against the cone inequality and the l1 / l2 bounds;
    matrices against the nuclear / Frobenius bounds with the tail measured by
    the trailing singular values. When ``delta`` (the RIP constant of order
    2k) is missing or above 0.4378 the records carry ``satisfied=None``.
    """
    truth = np.asarray(truth, dtype=float)
    h = np.asarray(estimate, dtype=float) - truth
    c = constants
    delta = c.delta if delta is None else delta
    hypothesis = delta is not None and delta <= DELTA_STABLE and not c.vacuous
    atol = _BOUND_ATOL * max(1.0, float(np.linalg.norm(truth)))
    rk = math.sqrt(k)
    records = []

    def add(name, lhs, rhs):
        ok = bool(lhs <= rhs + atol) if hypothesis else None
        records.append(BoundCheck(instance, name, float(lhs), float(rhs), ok))

    if truth.ndim == 1:
        order = np.argsort(-np.abs(truth), kind="stable")
        S, Sbar = order[:k], order[k:]
        tail = float(np.abs(truth[Sbar]).sum())
        add("cone", np.abs(h[Sbar]).sum(), c.C1 * np.abs(h[S]).sum() + c.C2 * tail)
        add("l1", np.abs(h).sum(), c.C3 * rk * noise_norm + c.C4 * tail)
        add("l2", np.linalg.norm(h), c.C5 * noise_norm + c.C6 * tail / rk)
    else:
        s = np.linalg.svd(truth, compute_uv=False)
        tail = float(s[k:].sum())
        sh = np.linalg.svd(h, compute_uv=False)
        add("nuclear", sh.sum(), c.C3 * rk * noise_norm + c.C4 * tail)
        add("frobenius", np.linalg.norm(h), c.C5 * noise_norm + c.C6 * tail / rk)
    return records


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "NA"
    return repr(v)


def _num(s):
    return math.nan if s == "NA" else float(s)


def _flag(s):
    return None if s == "NA" else s == "1"


@dataclass
class GuaranteeReport:
    """Collected certification results for one measurement operator."""

    delta_estimates: dict = field(default_factory=dict)
    theta_2k: float | None = None
    delta_2k: float | None = None
    constants: StabilityConstants | None = None
    nsp: NspVerdict | None = None
    bound_checks: list = field(default_factory=list)
    alpha: float | None = None
    beta: float | None = None
    beta_rule_satisfied: bool | None = None
    beta_admissible: float | None = None

    @property
    def violations(self) -> list:
        return [b for b in self.bound_checks if b.satisfied is False]

    def to_lines(self) -> list:
        out = ["# augrec guarantee report v1"]
        for level in sorted(self.delta_estimates):
            e = self.delta_estimates[level]
            out.append("\t".join(["delta", str(level), _fmt(e.delta), _fmt(e.exact), str(e.probes)]))
        if self.theta_2k is not None:
            out.append("\t".join(["theta", _fmt(self.delta_2k), _fmt(self.theta_2k)]))
        if self.constants is not None:
            c = self.constants
            out.append("\t".join(["constants", *(_fmt(v) for v in c[:6]), _fmt(c.vacuous)]))
        if self.alpha is not None:
            out.append(
                "\t".join(
                    ["beta_rule", _fmt(self.alpha), _fmt(self.beta), _fmt(self.beta_rule_satisfied), _fmt(self.beta_admissible)]
                )
            )
        if self.nsp is not None:
            n = self.nsp
            verdict = "vacuous" if n.vacuous else n.verdict
            out.append("\t".join(["nsp", verdict, str(n.probes), _fmt(n.lhs), _fmt(n.rhs), n.note.replace("\t", " ")]))
        for b in self.bound_checks:
            out.append("\t".join(["bound", b.instance or "-", b.bound, _fmt(b.lhs), _fmt(b.rhs), _fmt(b.satisfied)]))
        return out

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def from_lines(cls, lines) -> "GuaranteeReport":
        rep = cls()
        for line in lines:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            f = line.split("\t")
            kind = f[0]
            if kind == "delta":
                level = int(f[1])
                rep.delta_estimates[level] = RipEstimate(_num(f[2]), level, f[3] == "1", int(f[4]), ())
            elif kind == "theta":
                rep.delta_2k, rep.theta_2k = _num(f[1]), _num(f[2])
            elif kind == "constants":
                vals = [_num(v) for v in f[1:7]]
                th = rep.theta_2k if rep.theta_2k is not None else math.nan
                rep.constants = StabilityConstants(*vals, th, rep.delta_2k, f[7] == "1")
            elif kind == "beta_rule":
                rep.alpha, rep.beta = _num(f[1]), _num(f[2])
                rep.beta_rule_satisfied, rep.beta_admissible = _flag(f[3]), _num(f[4])
            elif kind == "nsp":
                rep.nsp = NspVerdict(
                    f[1] == "refuted-with-witness", int(f[2]), vacuous=f[1] == "vacuous",
                    lhs=_num(f[3]), rhs=_num(f[4]), note=f[5] if len(f) > 5 else "",
                )
            elif kind == "bound":
                inst = "" if f[1] == "-" else f[1]
                rep.bound_checks.append(BoundCheck(inst, f[2], _num(f[3]), _num(f[4]), _flag(f[5])))
            else:
                raise ValueError(f"unknown record type {kind!r}")
        return rep

    @classmethod
    def read(cls, path) -> "GuaranteeReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)
