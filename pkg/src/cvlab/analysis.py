"""Normalized-MSE decomposition of paired (true, estimated) performance.

For T paired samples (s_t, shat_t) of the true conditional performance and an
estimate of it, with plug-in (divide-by-T) moments, the decomposition

    MSE(shat, s) / (sigma_s * sigma_shat)
        = MSE(shat, mean s) / (sigma_s * sigma_shat)
          + sigma_s / sigma_shat
          - 2 * rho(shat, s)

is an exact algebraic identity; :func:`decompose` reports every component and
the residual of the identity, which must vanish to rounding error.  RMS values
(square roots of the MSEs) are reported alongside, matching the usual
experiment-table columns.

A small weak-correlation rho together with rms_cond being no smaller than
rms_mean is the signature that the estimator tracks the mean performance
rather than the training-set-conditional one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from cvlab.core import DomainError


class DegenerateVarianceError(DomainError):
    """A variance needed for normalization is exactly zero."""


@dataclass(frozen=True, eq=False)
class PairedPerformanceSample:
    """Per-trial true performance ``s`` and estimate ``s_hat``, equal lengths."""

    s: np.ndarray
    s_hat: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(-1)
        s_hat = np.asarray(self.s_hat, dtype=float).reshape(-1)
        if s.size != s_hat.size:
            raise DomainError("s and s_hat must have equal lengths")
        if s.size < 2:
            raise DomainError("need at least two trials")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(s_hat))):
            raise DomainError("entries must be finite")
        s = s.copy()
        s_hat = s_hat.copy()
        s.flags.writeable = False
        s_hat.flags.writeable = False
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "s_hat", s_hat)

    @property
    def trials(self) -> int:
        return self.s.size


@dataclass(frozen=True)
class DecompositionReport:
    """All components of the normalized-MSE identity (plug-in moments).

    The normalized fields (rho, sigma_ratio, lhs, rhs, residual) are None
    when either standard deviation is zero (``degenerate`` is then True).
    """

    trials: int
    mean_s: float
    mean_s_hat: float
    sigma_s: float
    sigma_s_hat: float
    mse_cond: float
    mse_mean: float
    rms_cond: float
    rms_mean: float
    degenerate: bool
    rho: float | None
    sigma_ratio: float | None
    lhs: float | None
    rhs: float | None
    residual: float | None

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "trials": self.trials,
            "mean_s": self.mean_s,
            "mean_s_hat": self.mean_s_hat,
            "sigma_s": self.sigma_s,
            "sigma_s_hat": self.sigma_s_hat,
            "mse_cond": self.mse_cond,
            "mse_mean": self.mse_mean,
            "rms_cond": self.rms_cond,
            "rms_mean": self.rms_mean,
            "degenerate": self.degenerate,
            "rho": self.rho,
            "sigma_ratio": self.sigma_ratio,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
        }


def decompose(sample: PairedPerformanceSample) -> DecompositionReport:
    """Compute means, sigmas, both MSEs/RMSs, rho and the identity residual."""
    s, s_hat = sample.s, sample.s_hat
    t = sample.trials
    mean_s = float(s.mean())
    mean_s_hat = float(s_hat.mean())
    var_s = float(((s - mean_s) ** 2).mean())
    var_s_hat = float(((s_hat - mean_s_hat) ** 2).mean())
    sigma_s = var_s ** 0.5
    sigma_s_hat = var_s_hat ** 0.5
    mse_cond = float(((s_hat - s) ** 2).mean())
    mse_mean = float(((s_hat - mean_s) ** 2).mean())
    degenerate = sigma_s == 0.0 or sigma_s_hat == 0.0
    if degenerate:
        rho = sigma_ratio = lhs = rhs = residual = None
    else:
        cov = float(((s - mean_s) * (s_hat - mean_s_hat)).mean())
        rho = cov / (sigma_s * sigma_s_hat)
        sigma_ratio = sigma_s / sigma_s_hat
        lhs = mse_cond / (sigma_s * sigma_s_hat)
        rhs = mse_mean / (sigma_s * sigma_s_hat) + sigma_ratio - 2.0 * rho
        residual = lhs - rhs
    return DecompositionReport(
        trials=t,
        mean_s=mean_s,
        mean_s_hat=mean_s_hat,
        sigma_s=sigma_s,
        sigma_s_hat=sigma_s_hat,
        mse_cond=mse_cond,
        mse_mean=mse_mean,
        rms_cond=mse_cond ** 0.5,
        rms_mean=mse_mean ** 0.5,
        degenerate=degenerate,
        rho=rho,
        sigma_ratio=sigma_ratio,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
    )


def identity_residual(sample: PairedPerformanceSample) -> float:
    """|lhs - rhs| of the decomposition identity; raises when degenerate."""
    report = decompose(sample)
    if report.degenerate:
        raise DegenerateVarianceError("zero variance: identity is undefined")
    return abs(report.residual)


@dataclass(frozen=True)
class ConvergenceDiagnostic:
    """Successive-gap summary over increasing resampling budgets."""

    budgets: tuple[int, ...]
    values: tuple[float, ...]
    gaps: tuple[float, ...]
    max_tail_gap: float
    tolerance: float
    converged: bool


def convergence_diagnostic(values: Mapping[int, float], tolerance: float) -> ConvergenceDiagnostic:
    """Check that estimates settle down as the budget (M or B) grows.

    ``values`` maps budgets to estimates; at least three budgets are needed.
    The diagnostic reports all successive absolute differences and declares
    convergence when the largest gap between consecutive budgets in the upper
    half of the budget range is at most ``tolerance``.
    """
    if len(values) < 3:
        raise DomainError("need at least three budgets")
    budgets = tuple(sorted(values))
    if len(set(budgets)) != len(budgets) or any(b <= 0 for b in budgets):
        raise DomainError("budgets must be distinct positive integers")
    vals = tuple(float(values[b]) for b in budgets)
    gaps = tuple(abs(b - a) for a, b in zip(vals, vals[1:]))
    # gaps[i] links budgets[i] and budgets[i+1]; keep those inside the upper
    # half of the budget list
    max_tail_gap = max(gaps[len(budgets) // 2 :])
    return ConvergenceDiagnostic(
        budgets=budgets,
        values=vals,
        gaps=gaps,
        max_tail_gap=max_tail_gap,
        tolerance=float(tolerance),
        converged=max_tail_gap <= float(tolerance),
    )
