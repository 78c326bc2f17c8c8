"""Self-consistent size of the magnon mode under Gaussian inhomogeneous broadening."""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx

SQRT_PI = np.sqrt(np.pi)


def _residual(x: float, X: float) -> float:
    # N_eff/N_tot = sqrt(pi) x erfcx(x) with N_eff/N_tot = x^2/X^2, divided through by x
    return x - X**2 * SQRT_PI * erfcx(x)


def neff_normalized(X: float) -> float:
    """Root ``x = sqrt(N_eff) Omega'/Delta`` for ``X = sqrt(N_tot) Omega'/Delta``."""
    if not X > 0:
        raise ValueError("normalised drive must be positive")
    lo, hi = 0.0, X
    f_lo, f_hi = _residual(lo, X), _residual(hi, X)
    if not (f_lo < 0 < f_hi or f_hi == 0):
        raise ArithmeticError(f"no positive root bracketed for X={X}")
    if f_hi == 0:
        return X
    return brentq(_residual, lo, hi, args=(X,), xtol=np.finfo(float).tiny, rtol=4 * np.finfo(float).eps)


def neff_solve(N_tot: float, Omega_prime: float, Delta: float) -> float:
    """Effective number of nuclei in the collective mode."""
    if not (N_tot > 0 and Omega_prime > 0 and Delta > 0):
        raise ValueError("N_tot, Omega_prime and Delta must all be positive")
    X = np.sqrt(N_tot) * Omega_prime / Delta
    x = neff_normalized(X)
    return float(N_tot * (x / X) ** 2)


def fixed_point_residual(N_eff: float, N_tot: float, Omega_prime: float, Delta: float) -> float:
    """Relative residual of the self-consistency equation at ``N_eff``."""
    x = np.sqrt(N_eff) * Omega_prime / Delta
    rhs = SQRT_PI * x * erfcx(x)
    return float(abs(N_eff / N_tot - rhs) / rhs)


def neff_curve(N_tot: float, Delta: float, drives) -> np.ndarray:
    """Rows of ``(X, N_eff/N_tot, Omega_exc/Delta)`` over single-nucleus couplings ``drives``."""
    rows = []
    for op in np.asarray(drives, dtype=float):
        n = neff_solve(N_tot, op, Delta)
        rows.append((np.sqrt(N_tot) * op / Delta, n / N_tot, np.sqrt(n) * op / Delta))
    return np.array(rows)
