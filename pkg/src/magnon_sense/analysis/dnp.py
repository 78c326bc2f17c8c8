"""Phenomenological saturation of dynamic nuclear polarization with preparation ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fitting import FitError, FitResult, best_of


@dataclass(frozen=True)
class DnpParams:
    a: float  # MHz
    b: float
    c: float  # MHz

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")


def dnp_model(r, p: DnpParams, which: str = "ref"):
    """Reference shift ``a / (1 + r/b)``; the sense curve adds the magnon shift ``c``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("preparation ratio must be >= 0")
    ref = p.a / (1.0 + r / p.b)
    if which == "ref":
        return ref
    if which == "sense":
        return ref + p.c
    raise ValueError(f"which must be 'ref' or 'sense', got {which!r}")


@dataclass
class DnpFit:
    params: DnpParams
    fit: FitResult | None

    @property
    def stderr(self) -> np.ndarray:
        return self.fit.stderr if self.fit is not None else np.zeros(3)


def _split(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (r, shift) pairs")
    return arr[:, 0], arr[:, 1]


def fit_dnp(ref_points, sense_points) -> DnpFit:
    """Joint least squares: both curves share ``(a, b)``, ``c`` comes from the sense curve."""
    r_ref, y_ref = _split(ref_points)
    r_sen, y_sen = _split(sense_points)
    if r_ref.size < 3 or r_sen.size < 3:
        raise FitError("fit_dnp needs at least 3 points per curve")
    r_all = np.concatenate([r_ref, r_sen])
    if np.ptp(r_all) == 0:
        raise FitError("degenerate design: all preparation ratios are equal")
    if not np.any(y_ref) and not np.any(y_sen):
        return DnpFit(DnpParams(0.0, 1.0, 0.0), None)
    if not np.any(y_ref):
        return DnpFit(DnpParams(0.0, 1.0, float(np.mean(y_sen))), None)

    # b is fitted as log(b) to keep it positive
    def res(p):
        a, b, c = p[0], np.exp(p[1]), p[2]
        return np.concatenate([a / (1 + r_ref / b) - y_ref, a / (1 + r_sen / b) + c - y_sen])

    scale = np.max(np.abs(y_ref))
    r_mid = np.median(r_all[r_all > 0]) if np.any(r_all > 0) else 1.0
    starts = [[scale * (1 + r_mid / b0), np.log(b0), float(np.mean(y_sen) - np.mean(y_ref))]
              for b0 in (0.1 * r_mid, r_mid, 10 * r_mid)]
    fit = best_of(res, starts)
    a, lb, c = fit.params
    # report the covariance in (a, b, c)
    jac = np.diag([1.0, np.exp(lb), 1.0])
    fit.cov = jac @ fit.cov @ jac.T
    return DnpFit(DnpParams(float(a), float(np.exp(lb)), float(c)), fit)


def differential_slope(ref_points, sense_points) -> tuple[float, float]:
    """Slope (and its 1-sigma error) of ``sense - ref`` against ``r`` at matching ratios."""
    r_ref, y_ref = _split(ref_points)
    r_sen, y_sen = _split(sense_points)
    if r_ref.shape != r_sen.shape or np.any(r_ref != r_sen):
        raise ValueError("differential slope needs reference and sense at the same ratios")
    d = y_sen - y_ref
    A = np.column_stack([r_ref, np.ones_like(r_ref)])
    coef, *_ = np.linalg.lstsq(A, d, rcond=None)
    resid = d - A @ coef
    dof = max(d.size - 2, 1)
    cov = (resid @ resid / dof) * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(np.sqrt(cov[0, 0]))
