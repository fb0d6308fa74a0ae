"""Experiment runner: trials, CSV output, sparsity sweeps and certification.

CSV layout
----------
UTF-8, comma separated, one header line, columns in the order of
:data:`CSV_COLUMNS`. Empty cells mean "not applicable". Floats with
``0 < |v| < 1e-3`` are written in scientific notation (``%.6e``), all other
floats with ``%.10g``. ``wall_time`` is the last column and the only one that
varies between identical runs.

Row kinds: ``trial`` (one per seed and method, in seed-major order), then
``median`` and ``mean`` summaries of ``rel_err`` per method over the
successful trials.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .. import guarantees as gt
from ..cs_solver import CsProblem, default_lambda_cs, solve_cs, solve_cs_discrepancy
from ..mc_solver import METHODS as MC_METHODS
from ..mc_solver import McProblem, default_lambda_mc, solve_mc
from ..penalty import PenaltyParams
from .config import ExperimentConfig
from .generators import gen_cs_instance, gen_mc_instance
from .metrics import rel_err_checked

__all__ = [
    "TrialRecord",
    "CSV_COLUMNS",
    "CS_METHODS",
    "MC_METHOD_NAMES",
    "method_penalty",
    "run_trial",
    "run_experiment",
    "run_sweep",
    "summarize",
    "write_csv",
    "read_csv",
    "certify",
]

log = logging.getLogger(__name__)

CS_METHODS = ("augmented", "lasso")
MC_METHOD_NAMES = tuple(MC_METHODS)


@dataclass
class TrialRecord:
    kind: str = "trial"
    mode: str = ""
    method: str = ""
    seed: int | None = None
    n: int | None = None
    p: int | None = None
    k: int | None = None
    setting: int | None = None
    block_size: int | None = None
    n1: int | None = None
    n2: int | None = None
    r: int | None = None
    n3: int | None = None
    sigma: float | None = None
    alpha: float | None = None
    beta: float | None = None
    rho: float | None = None
    lam: float | None = None
    tol: float | None = None
    maxit: int | None = None
    rel_err: float | None = None
    rel_err_absolute: bool | None = None
    iterations: int | None = None
    termination: str = ""
    status: str = "ok"
    message: str = ""
    wall_time: float | None = None

    def to_row(self) -> list:
        return [_fmt(getattr(self, f.name)) for f in fields(self)]

    @classmethod
    def from_row(cls, row) -> "TrialRecord":
        if isinstance(row, dict):
            row = [row[c] for c in CSV_COLUMNS]
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        vals = {}
        for f, cell in zip(fields(cls), row):
            vals[f.name] = _parse(cell, f.type)
        return cls(**vals)


CSV_COLUMNS = tuple(f.name for f in fields(TrialRecord))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if 0 < abs(v) < 1e-3:
            return f"{v:.6e}"
        return f"{v:.10g}"
    return str(v)


def _parse(cell: str, t: str):
    if t == "str":
        return cell
    if cell == "":
        return None
    if t.startswith("int"):
        return int(cell)
    if t.startswith("float"):
        return float(cell)
    if t.startswith("bool"):
        return cell == "1"
    return cell


def method_penalty(mode: str, method: str, cfg: ExperimentConfig) -> PenaltyParams:
    """Penalty parameters of a named method; the augmented models use ``cfg.alpha``, ``cfg.beta``."""
    if mode == "cs":
        if method == "augmented":
            return PenaltyParams(cfg.alpha, cfg.beta)
        if method == "lasso":
            return PenaltyParams(cfg.alpha, 0.0)
    elif mode == "mc":
        if method == "N-Nuclear":
            return PenaltyParams(cfg.alpha, cfg.beta)
        if method in MC_METHODS:
            return PenaltyParams(*MC_METHODS[method])
    raise ValueError(f"unknown {mode} method {method!r}")


def _methods(cfg: ExperimentConfig) -> list:
    if cfg.methods:
        return list(cfg.methods)
    return list(MC_METHOD_NAMES if cfg.mode == "mc" else CS_METHODS)


def _base_record(cfg, mode, method, seed, pen) -> TrialRecord:
    rec = TrialRecord(
        mode=mode, method=method, seed=seed, sigma=cfg.noise_sigma, alpha=pen.alpha if pen else None,
        beta=pen.beta if pen else None, rho=cfg.solver_rho, tol=cfg.solver_tol, maxit=cfg.solver_maxit,
    )
    if mode == "cs":
        rec.n, rec.p, rec.k, rec.setting = cfg.n, cfg.p, cfg.k, cfg.setting
        rec.block_size = cfg.block_size if cfg.setting == 2 else None
    else:
        rec.n1, rec.n2, rec.r = cfg.n1, cfg.dim2, cfg.r
    return rec


def _solve_cs_trial(cfg, seed, pen, rec):
    inst = gen_cs_instance(cfg, seed)
    tol, maxit = cfg.solver_tol, cfg.solver_maxit
    if cfg.lambda_policy == "discrepancy":
        sol, lam = solve_cs_discrepancy(inst.A, inst.y, float(np.linalg.norm(inst.noise)), pen, cfg.solver_rho, tol, maxit)
        estimate = sol.w
    else:
        lam = cfg.lam if cfg.lam is not None else default_lambda_cs(inst.A, inst.y, cfg.solver_rho)
        prob = CsProblem(inst.A, inst.y, lam, cfg.solver_rho, pen)
        sol = solve_cs(prob, tol=tol, maxit=maxit, continuation=cfg.lambda_policy == "continuation")
        estimate = sol.x
    rec.lam = lam
    return estimate, inst.x0, sol.trace


def _solve_mc_trial(cfg, seed, pen, rec):
    inst = gen_mc_instance(cfg, seed)
    rec.n3 = inst.op.n_obs
    lam = cfg.lam if cfg.lam is not None else default_lambda_mc(inst.op, inst.b, cfg.solver_rho)
    rec.lam = lam
    prob = McProblem(inst.op, inst.b, lam, cfg.solver_rho, pen)
    sol = solve_mc(prob, tol=cfg.solver_tol, maxit=cfg.solver_maxit, continuation=cfg.lambda_policy == "continuation")
    return sol.X, inst.X0, sol.trace


def run_trial(cfg: ExperimentConfig, seed: int, method: str) -> TrialRecord:
    """Generate the instance for ``seed``, solve it with ``method`` and record the outcome.

    Failures are caught and recorded with ``status='error'``.
    """
    mode = cfg.mode
    t0 = time.perf_counter()
    pen = None
    try:
        pen = method_penalty(mode, method, cfg)
    except ValueError as exc:
        rec = _base_record(cfg, mode, method, seed, None)
        rec.status, rec.message = "error", str(exc)
        rec.wall_time = time.perf_counter() - t0
        return rec
    rec = _base_record(cfg, mode, method, seed, pen)
    try:
        if mode == "cs":
            est, truth, trace = _solve_cs_trial(cfg, seed, pen, rec)
        elif mode == "mc":
            est, truth, trace = _solve_mc_trial(cfg, seed, pen, rec)
        else:
            raise ValueError(f"mode {mode!r} has no trials")
        rec.rel_err, rec.rel_err_absolute = rel_err_checked(est, truth)
        rec.iterations = trace.iterations
        rec.termination = trace.termination
    except Exception as exc:  # recorded per row, the campaign continues
        log.debug("trial failed:\n%s", traceback.format_exc())
        rec.status = "error"
        rec.message = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_one(args):
    return run_trial(*args)


def summarize(records) -> list:
    """Median and mean ``rel_err`` rows per method over successful trials."""
    out = []
    methods = list(dict.fromkeys(r.method for r in records if r.kind == "trial"))
    for kind, fn in (("median", np.median), ("mean", np.mean)):
        for m in methods:
            rows = [r for r in records if r.kind == "trial" and r.method == m]
            ok = [r.rel_err for r in rows if r.status == "ok" and r.rel_err is not None]
            proto = rows[0]
            rec = dataclasses.replace(
                proto, kind=kind, seed=None, n3=None, lam=None, rel_err=float(fn(ok)) if ok else None,
                rel_err_absolute=None, iterations=None, termination="", wall_time=None,
                status="ok" if ok else "error", message=f"{len(ok)} of {len(rows)} trials",
            )
            out.append(rec)
    return out


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list:
    """Run every (seed, method) pair of ``cfg``; returns trial rows followed by summary rows.

    With ``cfg.workers > 1`` trials run in a process pool; rows are always
    ordered by seed, then method. When ``write`` is set and ``cfg.out`` is
    given the CSV is written there.
    """
    if cfg.mode not in ("cs", "mc"):
        raise ValueError("run_experiment needs mode 'cs' or 'mc'")
    jobs = [(cfg, seed, m) for seed in cfg.seeds for m in _methods(cfg)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    records += summarize(records)
    if write and cfg.out:
        write_csv(records, cfg.out)
    return records


def run_sweep(cfg: ExperimentConfig, write: bool = True) -> list:
    """Sparse-recovery campaign over ``cfg.ks`` (default 10, 20, ..., 120)."""
    if cfg.mode != "cs":
        raise ValueError("sweeps are defined for sparse recovery")
    ks = cfg.ks if cfg.ks is not None else list(range(10, 121, 10))
    records = []
    for k in ks:
        records += run_experiment(cfg.replace(k=k), write=False)
    if write and cfg.out:
        write_csv(records, cfg.out)
    return records


def write_csv(records, path=None) -> str:
    """Write rows to ``path`` (or return the CSV text when ``path`` is None)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.to_row())
    text = buf.getvalue()
    if path is None:
        return text
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path_or_text) -> list:
    if "\n" in str(path_or_text):
        lines = io.StringIO(path_or_text)
        return _read(lines)
    with open(path_or_text, encoding="utf-8", newline="") as fh:
        return _read(fh)


def _read(fh) -> list:
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    return [TrialRecord.from_row(row) for row in reader]


def _delta(A, level, cfg, seed):
    """Exact RIP constant when enumeration fits the budget, else a randomized lower bound."""
    if level < 1:
        return None
    level = min(level, A.shape[1])
    if math.comb(A.shape[1], level) <= gt.ENUMERATION_BUDGET:
        return gt.rip_delta_exact(A, level, normalize=cfg.normalize)
    return gt.rip_delta_randomized(A, level, cfg.probes, seed=seed, normalize=cfg.normalize)


def certify(cfg: ExperimentConfig, write: bool = True) -> gt.GuaranteeReport:
    """Certification report for the sparse-recovery operator of ``cfg.seeds[0]``.

    Computes the RIP constants of order k and 2k, theta, the stability
    constants, the parameter rule for beta and an NSP probe. When
    ``cfg.noise_sigma > 0`` every seed additionally runs an error-bound check:
    the instance is solved with the discrepancy choice of ``lam`` (the sparse
    block then satisfies ``||A w - y|| <= ||noise||``) and the bounds are
    evaluated on it with the constants of that instance's own operator.
    Bounds are marked ``NA`` unless the RIP constant is exact and at most
    0.4378.
    """
    if cfg.mode not in ("cs", "certify"):
        raise ValueError("certification is implemented for sparse recovery operators")
    if not cfg.seeds:
        raise ValueError("certify needs at least one seed")
    pen = PenaltyParams(cfg.alpha, cfg.beta)
    rep = gt.GuaranteeReport(alpha=cfg.alpha, beta=cfg.beta)
    first = cfg.seeds[0]
    A = gen_cs_instance(cfg, first).A
    if cfg.normalize:
        A = A / np.linalg.norm(A, axis=0)
    for level in (cfg.k, 2 * cfg.k):
        est = _delta(A, level, cfg, first)
        if est is not None:
            rep.delta_estimates[est.level] = est
    d2 = rep.delta_estimates.get(min(2 * cfg.k, A.shape[1]))
    if d2 is not None and d2.delta < 1:
        rep.delta_2k = d2.delta
        rep.theta_2k = gt.theta(d2.delta)
        rep.beta_admissible = gt.admissible_beta(cfg.alpha, d2.delta)
        rep.beta_rule_satisfied = (1.0 + cfg.alpha * cfg.beta) * rep.theta_2k <= 1.0
        if cfg.alpha * cfg.beta < 1:
            rep.constants = gt.stability_constants(cfg.alpha, cfg.beta, d2.delta)
    if cfg.k >= 1:
        rep.nsp = gt.nsp_probe_vec(A, cfg.k, cfg.alpha, cfg.beta, probes=cfg.probes, seed=first)

    if cfg.noise_sigma > 0 and cfg.k >= 1 and cfg.alpha * cfg.beta < 1:
        for seed in cfg.seeds:
            rep.bound_checks += _bound_trial(cfg, seed, pen)
    if write and cfg.out:
        rep.write(cfg.out)
    return rep


def _bound_trial(cfg, seed, pen) -> list:
    inst = gen_cs_instance(cfg, seed)
    A = inst.A
    if cfg.normalize:
        # rescaling columns changes the unknown; keep the measurements and rescale the truth
        norms = np.linalg.norm(A, axis=0)
        A, x0 = A / norms, inst.x0 * norms
    else:
        x0 = inst.x0
    est = _delta(A, 2 * cfg.k, cfg, seed)
    # an estimate that is only a lower bound never establishes the hypothesis
    delta = est.delta if est.exact else math.inf
    c = gt.stability_constants(cfg.alpha, cfg.beta, min(est.delta, 0.999999))
    eps = float(np.linalg.norm(inst.noise))
    sol, _ = solve_cs_discrepancy(A, inst.y, eps, pen, cfg.solver_rho, tol=1e-8, maxit=3000)
    return gt.verify_error_bound(x0, sol.w, eps, cfg.k, c, delta=delta, instance=f"seed={seed}")
