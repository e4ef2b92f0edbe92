"""Run configuration shared by the library entry points and the CLI."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .errors import ParameterRangeError
from .kernels import K_MAX, Schedule
from .solver import SolverConfig

CRITERIA = ("det", "aic", "bic", "cv")
CI_VARIANTS = ("ridge", "lasso", "apley")


def parse_criterion(text):
    """Split ``"cv:K"`` style criteria into ``(name, K)``; K is None otherwise."""
    text = str(text).strip().lower()
    if text in ("det", "deterministic"):
        return "det", None
    if text in ("aic", "bic"):
        return text, None
    if text == "cv":
        return "cv", 10
    if text.startswith("cv:"):
        try:
            k = int(text[3:])
        except ValueError:
            raise ParameterRangeError(f"bad fold count in criterion {text!r}") from None
        if k < 2:
            raise ParameterRangeError("cross-validation needs at least 2 folds")
        return "cv", k
    raise ParameterRangeError(f"unknown criterion {text!r}; expected det, aic, bic or cv:K")


@dataclass(frozen=True)
class RunConfig:
    d_max: int = 10
    r_max: int = 10
    k: int = 2
    g0: int = 5
    growth: int = 2
    h0: float = 0.75
    decay: float = 2.0 / 3.0
    rho: float = 0.96
    lambda_min_ratio: float = 1e-4
    max_terms: Optional[int] = None
    atom_cap: int = 100_000
    max_group_size: int = 3000
    memory_limit_mb: float = 2048.0
    standardize: bool = True
    criterion: str = "det"
    alpha: float = 0.05
    ci_variant: str = "ridge"
    seed: int = 0
    threads: Optional[int] = None
    out: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.d_max) < 1 or int(self.r_max) < 1:
            raise ParameterRangeError("d_max and r_max must be >= 1")
        if not 0 <= int(self.k) <= K_MAX:
            raise ParameterRangeError(f"k must lie in [0, {K_MAX}]")
        if not 0.0 < float(self.rho) < 1.0:
            raise ParameterRangeError("rho must lie in (0, 1)")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ParameterRangeError("alpha must lie in (0, 1)")
        if not 0.0 <= float(self.lambda_min_ratio) < 1.0:
            raise ParameterRangeError("lambda_min_ratio must lie in [0, 1)")
        if self.g0 < 2 or self.growth < 1 or self.h0 <= 0 or not 0 < self.decay <= 1:
            raise ParameterRangeError("invalid resolution schedule")
        parse_criterion(self.criterion)
        if self.ci_variant not in CI_VARIANTS:
            raise ParameterRangeError(f"ci_variant must be one of {', '.join(CI_VARIANTS)}")
        if self.max_terms is not None and int(self.max_terms) < 0:
            raise ParameterRangeError("max_terms must be >= 0 (0 means no cap)")
        if self.threads is not None and int(self.threads) < 1:
            raise ParameterRangeError("threads must be >= 1")

    @property
    def schedule(self):
        return Schedule(self.g0, self.growth, self.h0, self.decay)

    @property
    def criterion_name(self):
        return parse_criterion(self.criterion)[0]

    @property
    def cv_folds(self):
        return parse_criterion(self.criterion)[1]

    def resolved_threads(self):
        if self.threads is not None:
            return int(self.threads)
        env = os.environ.get("MRFA_THREADS")
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ParameterRangeError(f"MRFA_THREADS must be an integer, got {env!r}") from None
        return 1

    def solver_config(self):
        """Solver settings; ``max_terms=None`` picks a criterion-aware default.

        The statistical criteria stop once the unique nonzero count reaches
        the number of distinct input rows, where their degrees-of-freedom
        accounting breaks down; the deterministic rule wants the smallest
        stable lambda, so it runs uncapped (``0``).
        """
        max_terms = self.max_terms
        if max_terms is None and self.criterion_name == "det":
            max_terms = 0
        return SolverConfig(
            d_max=self.d_max, r_max=self.r_max, k=self.k, schedule=self.schedule,
            atom_cap=self.atom_cap, rho=self.rho, lambda_min_ratio=self.lambda_min_ratio,
            max_terms=max_terms, max_group_size=self.max_group_size,
            memory_limit_mb=self.memory_limit_mb, standardize=self.standardize)

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ParameterRangeError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
