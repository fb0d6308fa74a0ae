"""Experiment configuration and the ``key=value`` config-file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

__all__ = ["ExperimentConfig", "parse_seeds", "parse_int_list", "read_config_file", "LAMBDA_POLICIES"]

LAMBDA_POLICIES = ("continuation", "fixed", "discrepancy")


def parse_seeds(text) -> list:
    """``"0,1,5"`` / ``"0-9"`` / ``"0-4,10"`` -> list of ints, order preserved."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if part[0] != "-" else ("-" + part[1:].split("-", 1)[0], part[1:].split("-", 1)[1])
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return parse_seeds(text)


def _parse_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [t.strip() for t in str(text).split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    """Settings for one ``cs``, ``mc`` or ``certify`` campaign.

    ``None`` for ``sigma``, ``rho``, ``tol`` and ``maxit`` selects the per-mode
    default (noiseless / 1 / 1e-4 / 500 for sparse recovery, 1e-3 / 0.1 / 1e-8 /
    2000 for completion). For entry sampling the X-step moves the iterate by
    ``1 / (1 + rho)`` of a full soft-impute step, so the smaller coupling weight
    lets completion runs converge within 2000 iterations.
    """

    mode: str = "cs"
    # sparse recovery
    p: int = 512
    n: int = 128
    k: int = 10
    setting: int = 1
    block_size: int = 8
    ensemble: str = "gaussian"
    tail: float = 0.0
    # completion
    n1: int = 100
    n2: int | None = None
    r: int = 10
    ratio: float | None = 2.632
    sr: float | None = None
    # shared
    sigma: float | None = None
    alpha: float = 0.5
    beta: float = 0.1
    lambda_policy: str = "continuation"
    lam: float | None = None
    rho: float | None = None
    tol: float | None = None
    maxit: int | None = None
    seeds: list = field(default_factory=lambda: [0])
    methods: list | None = None
    ks: list | None = None
    probes: int = 1000
    normalize: bool = False
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        self.seeds = parse_seeds(self.seeds)
        if self.methods is not None:
            self.methods = _parse_list(self.methods)
        if self.ks is not None:
            self.ks = parse_int_list(self.ks)
        self.validate()

    def validate(self):
        if self.mode not in ("cs", "mc", "certify"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ValueError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if self.mode in ("cs", "certify"):
            if self.p <= 0 or self.n <= 0:
                raise ValueError("dimensions must be positive")
            if not 0 <= self.k <= self.p:
                raise ValueError("need 0 <= k <= p")
            if self.setting not in (1, 2):
                raise ValueError("setting must be 1 or 2")
            if self.ensemble not in ("gaussian", "frame"):
                raise ValueError("ensemble must be 'gaussian' or 'frame'")
            for kk in self.ks or ():
                if not 0 <= kk <= self.p:
                    raise ValueError(f"sweep sparsity {kk} outside [0, p]")
        if self.mode == "mc":
            if self.n1 <= 0 or self.dim2 <= 0:
                raise ValueError("dimensions must be positive")
            if not 1 <= self.r <= min(self.n1, self.dim2):
                raise ValueError("need 1 <= r <= min(n1, n2)")
            if self.sr is not None and not 0 < self.sr <= 1:
                raise ValueError("sr must lie in (0, 1]")
            if self.ratio is None and self.sr is None:
                raise ValueError("need ratio or sr")
            if self.lambda_policy == "discrepancy":
                raise ValueError("discrepancy policy is only available for sparse recovery")
        if self.lambda_policy == "discrepancy" and not self.noise_sigma:
            raise ValueError("discrepancy policy needs sigma > 0")
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ValueError("maxit must be >= 1")

    @property
    def dim2(self) -> int:
        return self.n1 if self.n2 is None else self.n2

    @property
    def noise_sigma(self) -> float:
        if self.sigma is not None:
            return self.sigma
        return 1e-3 if self.mode == "mc" else 0.0

    @property
    def solver_rho(self) -> float:
        if self.rho is not None:
            return self.rho
        return 0.1 if self.mode == "mc" else 1.0

    @property
    def solver_tol(self) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-8 if self.mode == "mc" else 1e-4

    @property
    def solver_maxit(self) -> int:
        if self.maxit is not None:
            return self.maxit
        return 2000 if self.mode == "mc" else 500

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string values (config file or CLI), converting by field type."""
        return cls(**coerce(values))


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def coerce(values: dict) -> dict:
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for key, raw in values.items():
        name = key.replace("-", "_")
        if name == "lambda":
            name = "lam"
        if name not in types:
            raise ValueError(f"unknown config key {key!r}")
        if not isinstance(raw, str):
            out[name] = raw
            continue
        t = types[name]
        text = raw.strip()
        if "None" in t and text.lower() in ("", "none"):
            out[name] = None
        elif t.startswith("int"):
            out[name] = int(text)
        elif t.startswith("float"):
            out[name] = float(text)
        elif t.startswith("bool"):
            try:
                out[name] = _BOOL[text.lower()]
            except KeyError:
                raise ValueError(f"{key}: not a boolean: {raw!r}") from None
        else:
            out[name] = text
    return out


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values
