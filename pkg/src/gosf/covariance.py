"""Covariance specifications used by the reference-law oracles and simulations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InputError

KINDS = ("identity", "ar1", "long_memory", "explicit")


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    kind: str
    p: int
    rho: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise InputError("p must be positive")
        if self.kind == "ar1" and not (self.rho is not None and 0 < self.rho < 1):
            raise InputError(f"ar1 needs 0 < rho < 1, got {self.rho}")
        if self.kind == "long_memory" and not (self.rho is not None and 0.5 < self.rho < 1):
            raise InputError(f"long_memory needs 1/2 < rho < 1, got {self.rho}")
        if self.kind == "explicit":
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (self.p, self.p):
                raise InputError(f"explicit covariance must be {self.p}x{self.p}")

    @classmethod
    def identity(cls, p):
        return cls("identity", p)

    @classmethod
    def ar1(cls, p, rho):
        return cls("ar1", p, rho=rho)

    @classmethod
    def long_memory(cls, p, rho):
        return cls("long_memory", p, rho=rho)

    @classmethod
    def explicit(cls, matrix):
        m = np.asarray(matrix, dtype=float)
        return cls("explicit", m.shape[0], matrix=m)

    @classmethod
    def parse(cls, text: str, p: int):
        """Parse ``identity``, ``ar1:0.5`` or ``long_memory:0.8``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().replace("-", "_")
        if kind == "identity":
            return cls.identity(p)
        if kind in ("ar1", "long_memory"):
            if not arg:
                raise InputError(f"{kind} needs a rho value, e.g. {kind}:0.5")
            return cls(kind, p, rho=float(arg))
        raise InputError(f"cannot parse covariance {text!r}")

    def to_dict(self):
        out = {"kind": self.kind, "p": self.p}
        if self.rho is not None:
            out["rho"] = self.rho
        if self.kind == "explicit":
            out["matrix"] = np.asarray(self.matrix).tolist()
        return out

    def label(self) -> str:
        return self.kind if self.rho is None else f"{self.kind}:{self.rho:g}"


def make_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Materialize the ``p x p`` matrix, checking positive definiteness.

    ``ar1``: ``rho^|j-k|``.  ``long_memory``: with ``d = |j-k|``,
    ``(|d+1|^(2 rho) + |d-1|^(2 rho) - 2 d^(2 rho)) / 2``.
    """
    p = spec.p
    if spec.kind == "identity":
        return np.eye(p)
    d = np.abs(np.subtract.outer(np.arange(p), np.arange(p))).astype(float)
    if spec.kind == "ar1":
        S = spec.rho ** d
    elif spec.kind == "long_memory":
        h = 2.0 * spec.rho
        S = 0.5 * (np.abs(d + 1.0) ** h + np.abs(d - 1.0) ** h - 2.0 * d ** h)
    else:
        S = np.asarray(spec.matrix, dtype=float)
    S = 0.5 * (S + S.T)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise InputError(f"covariance {spec.label()} is not positive definite") from None
    return S
