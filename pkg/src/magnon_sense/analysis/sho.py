"""Damped-oscillator model of collective magnon injection.

A ground state coupled with strength ``Omega'`` to ``N`` excited states whose
detunings follow a Lorentzian of half width ``Delta`` obeys, in the
large-``N`` limit, ``a_g'' = -N Omega'^2 a_g - Delta a_g'``.  All frequencies
are ordinary (MHz); times are ns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels import amplitude_rk4
from .fitting import FitError, FitResult, best_of
from .series import TimeSeries

TWO_PI = 2 * np.pi
PER_NS = 1e-3


@dataclass(frozen=True)
class ShoParams:
    omega0: float  # MHz, asymptotic shift
    Gamma: float  # MHz
    Omega_exc: float  # MHz

    def __post_init__(self):
        if self.Gamma < 0 or self.Omega_exc < 0:
            raise ValueError("Gamma and Omega_exc must be >= 0")


def _sho(T, omega0, Gamma, Omega_exc):
    t = TWO_PI * PER_NS * np.asarray(T, dtype=float)
    d = Omega_exc**2 - Gamma**2
    if d >= 0:
        return omega0 * (1.0 - np.exp(-Gamma * t) * np.cos(np.sqrt(d) * t))
    # exp(-G t) cosh(k t) with the exponents combined so neither factor overflows
    k = np.sqrt(-d)
    return omega0 * (1.0 - 0.5 * (np.exp((k - Gamma) * t) + np.exp(-(k + Gamma) * t)))


def sho_response(p: ShoParams, T) -> np.ndarray:
    """``omega0 * (1 - exp(-2 pi Gamma T) cos(2 pi T sqrt(Omega_exc^2 - Gamma^2)))``.

    Past critical damping the cosine continues analytically into a cosh.
    """
    if np.any(np.asarray(T) < 0):
        raise ValueError("drive time must be >= 0")
    return _sho(T, p.omega0, p.Gamma, p.Omega_exc)


def exponents(N: float, Omega_prime: float, Delta: float) -> tuple[complex, complex]:
    """``lambda_+-`` in 1/ns."""
    root = np.sqrt(complex(Delta**2 / 4 - N * Omega_prime**2))
    scale = TWO_PI * PER_NS
    return scale * (-Delta / 2 + root), scale * (-Delta / 2 - root)


def sho_amplitude(N: float, Omega_prime: float, Delta: float, t) -> np.ndarray:
    """Large-N ground amplitude ``a_g(t)`` from ``a_g(0)=1``, ``a_g'(0)=0``."""
    t = np.asarray(t, dtype=float)
    lp, lm = exponents(N, Omega_prime, Delta)
    if abs(lp - lm) < 1e-12 * max(abs(lp), 1e-300):
        a = (1 - lp * t) * np.exp(lp * t)
    else:
        a = (lp * np.exp(lm * t) - lm * np.exp(lp * t)) / (lp - lm)
    return np.real_if_close(a, tol=1e6)


def sho_analytic(N: float, Omega_prime: float, Delta: float, t) -> np.ndarray:
    """Ground-state probability ``|a_g(t)|^2`` of the large-N solution."""
    return np.abs(sho_amplitude(N, Omega_prime, Delta, t)) ** 2


def lorentzian_detunings(N: int, Delta: float, rng_seed: int) -> np.ndarray:
    """Inverse-CDF samples of a Lorentzian with half width ``Delta``."""
    u = np.random.default_rng(rng_seed).random(N)
    return Delta * np.tan(np.pi * (u - 0.5))


def sho_oracle(
    N: int,
    Omega_prime: float,
    Delta: float,
    T_grid,
    rng_seed: int = 0,
    detunings: np.ndarray | None = None,
) -> TimeSeries:
    """Brute-force RK4 solution of the N+1 amplitude equations.

    In the frame ``c_e = a_e exp(-i 2 pi delta_e t)`` the system is
    ``i c_e' = 2 pi (Omega' a_g + delta_e c_e)``, ``i a_g' = 2 pi Omega' sum(c_e)``.
    The step resolves the largest sampled detuning.  The returned series
    holds ``|a_g|^2``; ``meta['amplitude']`` keeps the complex ``a_g``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    times = np.asarray(T_grid, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("T_grid must be ascending and start at t >= 0")
    delta = lorentzian_detunings(N, Delta, rng_seed) if detunings is None else np.asarray(detunings, float)
    if delta.size != N:
        raise ValueError("need one detuning per excited state")
    w = TWO_PI * PER_NS
    fastest = np.max(np.abs(delta)) + np.sqrt(N) * abs(Omega_prime) + 1e-12
    h_max = 0.5 / (w * fastest)

    g = 1.0 + 0j
    c = np.zeros(N, dtype=complex)
    amp = np.empty(times.size, dtype=complex)
    t_now = 0.0
    for i, t_next in enumerate(times):
        span = t_next - t_now
        if span > 0:
            n = int(np.ceil(span / h_max))
            g = amplitude_rk4(g, c, w * delta, w * Omega_prime, span / n, n)
            t_now = t_next
        amp[i] = g
    meta = {"seed": rng_seed, "amplitude": amp, "N": N, "Omega_prime": Omega_prime, "Delta": Delta}
    return TimeSeries.from_samples(times, np.abs(amp) ** 2, **meta)


def sho_eigen(N: int, Omega_prime: float, Delta: float, t, detunings: np.ndarray) -> np.ndarray:
    """Exact ``a_g(t)`` for given detunings by diagonalising the arrowhead matrix."""
    M = np.zeros((N + 1, N + 1))
    M[0, 1:] = M[1:, 0] = Omega_prime
    M[1:, 1:] = np.diag(detunings)
    E, V = np.linalg.eigh(M)
    t = np.asarray(t, dtype=float)
    phases = np.exp(-1j * TWO_PI * PER_NS * np.outer(t, E))
    return phases @ (V[0] * V[0])


@dataclass
class ShoFit:
    params: ShoParams
    cov: np.ndarray
    fit: FitResult
    degenerate: bool

    @property
    def stderr(self) -> np.ndarray:
        return self.fit.stderr


def _dominant_frequency(t, y) -> float:
    """Strongest nonzero FFT frequency of ``y`` in MHz (``t`` in ns)."""
    y = y - y.mean()
    if not np.any(y):
        return 0.0
    power = np.abs(np.fft.rfft(y, n=8 * y.size))
    f = np.fft.rfftfreq(8 * y.size, d=(t[1] - t[0]) * PER_NS)
    return float(f[1 + np.argmax(power[1:])])


def fit_sho(series: TimeSeries) -> ShoFit:
    """Least-squares fit of :func:`sho_response` with under- and overdamped starts.

    The fit works in ``(omega0, Gamma, Omega_exc)`` directly; both regimes are
    reachable from every start because the model is continuous across
    critical damping.  ``degenerate`` marks fits where the exchange
    frequency is not distinguishable from zero.
    """
    if len(series) < 8:
        raise FitError("fit_sho needs at least 8 samples")
    t = series.times
    y = series.values

    def res(p):
        return _sho(t, p[0], abs(p[1]), abs(p[2])) - y

    span = (t[-1] - t[0]) * PER_NS
    late = y[-max(len(y) // 4, 2):].mean()
    amp = late if abs(late) > 1e-12 else (y.max() if abs(y.max()) > abs(y.min()) else y.min())
    if amp == 0:
        amp = 1e-12
    f0 = _dominant_frequency(t, y)
    starts = []
    for f in {f0, max(f0, 1 / span) * 0.5, max(f0, 1 / span) * 2}:
        for g in (0.1 / span, 1 / span):
            starts.append([amp, g, max(f, 0.5 / span)])
    for g in (1 / span, 4 / span):
        starts.append([amp, g, 0.5 * g])
    fit = best_of(res, starts)
    p = fit.params
    params = ShoParams(float(p[0]), float(abs(p[1])), float(abs(p[2])))
    err = fit.stderr
    scale = max(np.max(np.abs(y)), 1e-300)
    degenerate = bool(
        not np.all(np.isfinite(err))
        or abs(params.omega0) < 1e-9 * scale
        or np.max(np.abs(y - y[0])) < 1e-12 * max(scale, 1.0)
        or err[2] >= params.Omega_exc
    )
    return ShoFit(params, fit.cov, fit, degenerate)
