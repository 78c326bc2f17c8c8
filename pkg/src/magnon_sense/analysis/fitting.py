"""Levenberg-Marquardt least squares with central-difference Jacobians."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

MAX_ITER = 200
TOL = 1e-10
REL_STEP = 1e-6


class FitError(RuntimeError):
    pass


@dataclass
class FitResult:
    params: np.ndarray
    cov: np.ndarray
    cost: float  # 0.5 * sum of squared residuals
    nfev: int
    converged: bool
    message: str

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.abs(np.diag(self.cov)))

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(2.0 * self.cost))


def central_jacobian(fun: Callable, p: np.ndarray, rel_step: float = REL_STEP) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(p.size):
        h = rel_step * max(abs(p[i]), 1.0)
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        cols.append((fun(up) - fun(dn)) / (2 * h))
    return np.column_stack(cols)


def levenberg_marquardt(residuals: Callable, p0, max_iter: int = MAX_ITER, tol: float = TOL) -> FitResult:
    """Minimise ``sum(residuals(p)**2)`` from ``p0``.

    Covariance is ``s^2 (J^T J)^-1`` with ``s^2`` the residual variance; it is
    filled with ``inf`` when the Jacobian is rank deficient.
    """
    p0 = np.asarray(p0, dtype=float)
    r0 = np.asarray(residuals(p0), dtype=float)
    if r0.size < p0.size:
        raise FitError(f"{r0.size} residuals cannot constrain {p0.size} parameters")
    sol = least_squares(
        residuals,
        p0,
        jac=lambda p: central_jacobian(residuals, p),
        method="lm",
        ftol=tol,
        xtol=tol,
        gtol=tol,
        max_nfev=max_iter,
    )
    J = central_jacobian(residuals, sol.x)
    dof = max(sol.fun.size - sol.x.size, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    jtj = J.T @ J
    if np.linalg.matrix_rank(jtj) < sol.x.size:
        cov = np.full((sol.x.size, sol.x.size), np.inf)
    else:
        cov = s2 * np.linalg.inv(jtj)
    return FitResult(sol.x, cov, float(sol.cost), int(sol.nfev), bool(sol.status > 0), sol.message)


def best_of(residuals: Callable, starts, **kw) -> FitResult:
    """Run :func:`levenberg_marquardt` from every start and keep the lowest cost."""
    best = None
    for p0 in starts:
        try:
            res = levenberg_marquardt(residuals, p0, **kw)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(res.params)):
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("no start converged to a finite solution")
    return best


@dataclass
class PowerLaw:
    prefactor: float
    exponent: float
    exponent_err: float


def fit_power_law(x, y, sigma=None) -> PowerLaw:
    """Fit ``y = c * x**beta``; the log-log line seeds the nonlinear fit.

    Residuals are divided by ``sigma`` (default ``y``, i.e. constant relative error).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs >= 3 positive points")
    sigma = y if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(sigma <= 0):
        raise FitError("sigma must be positive")
    beta0, logc0 = np.polyfit(np.log(x), np.log(y), 1)

    def res(p):
        return (p[0] * x ** p[1] - y) / sigma

    fit = levenberg_marquardt(res, [np.exp(logc0), beta0])
    return PowerLaw(float(fit.params[0]), float(fit.params[1]), float(fit.stderr[1]))
