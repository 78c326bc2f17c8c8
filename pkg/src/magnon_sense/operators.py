"""Hilbert-space building blocks for the electron + two-species nuclear model.

Every operator is a plain complex ``numpy.ndarray``.  The full space is the
tensor product electron (2) x arsenic ladder (5) x indium ladder (5), always in
that order, giving dimension 50.

Basis conventions
-----------------
- electron: index 0 is spin-up (S_z = +1/2), index 1 is spin-down.
- nuclear ladder: index ``l + 2`` holds the level ``I_z + l`` for
  ``l = -2..2``; the central level (index 2) is the prepared state.

Units: frequencies in MHz (ordinary, not angular), times in ns.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

LADDER_LEVELS = 5
ELECTRON_DIM = 2
SLOTS = ("electron", "As", "In")
SLOT_DIMS = {"electron": ELECTRON_DIM, "As": LADDER_LEVELS, "In": LADDER_LEVELS}
TOTAL_DIM = ELECTRON_DIM * LADDER_LEVELS * LADDER_LEVELS

_G_FACTORS = {Fraction(3, 2): 6.0, Fraction(9, 2): 1584.0 / 5.0}


@dataclass(frozen=True)
class SpeciesParams:
    """Physical constants of one nuclear species taking part in the magnon mode.

    ``N`` is the effective number of nuclei in the mode (participation ratio
    times the total count), not the total number in the dot.
    """

    name: str
    spin: float
    omega_n: float  # MHz
    A: float  # MHz, single-nucleus hyperfine constant
    B_Q: float  # MHz
    theta: float  # degrees
    N: float
    Gamma_n: float  # MHz

    def __post_init__(self):
        if Fraction(self.spin).limit_denominator(2) not in _G_FACTORS:
            raise ValueError(f"{self.name}: unsupported nuclear spin {self.spin}")
        for field in ("omega_n", "A", "B_Q", "N", "Gamma_n"):
            if getattr(self, field) < 0:
                raise ValueError(f"{self.name}: {field} must be >= 0")
        if not 0.0 <= self.theta < 90.0:
            raise ValueError(f"{self.name}: theta must lie in [0, 90) degrees")

    def with_(self, **changes) -> "SpeciesParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SystemConfig:
    """Full simulation configuration.

    ``Gamma_e`` of ``None`` means "calibrate against the Hahn-echo T2"
    (see :func:`magnon_sense.master_equation.calibrate_gamma_e`).
    ``ramsey_tau`` of ``None`` selects the optimal side-of-fringe delay
    ``T2_star / sqrt(2)``.
    """

    As: SpeciesParams
    In: SpeciesParams
    T2_star: float = 32.0  # ns
    T2: float = 2000.0  # ns
    Q: float = 45.0
    Gamma_e: float | None = None  # MHz
    Gamma_p: float = 35.0  # MHz
    omega_e: float = 28e3  # MHz
    ensemble_samples: int = 21
    dt: float = 0.25  # ns
    ramsey_tau: float | None = None  # ns
    delta_free: float = 0.0  # MHz
    reinit: str = "project"
    pump_time: float = 150.0  # ns

    def __post_init__(self):
        if self.T2_star <= 0 or self.T2 <= 0:
            raise ValueError("T2_star and T2 must be positive")
        if self.T2_star > self.T2:
            raise ValueError("invariant violated: T2_star <= T2")
        if self.ensemble_samples < 1:
            raise ValueError("ensemble_samples must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.Q <= 0:
            raise ValueError("Q must be positive")
        if self.Gamma_p < 0 or (self.Gamma_e is not None and self.Gamma_e < 0):
            raise ValueError("rates must be >= 0")
        if self.reinit not in ("project", "pump"):
            raise ValueError(f"unknown reinit method {self.reinit!r}")

    @property
    def species(self) -> tuple[SpeciesParams, SpeciesParams]:
        return (self.As, self.In)

    @property
    def tau(self) -> float:
        """Ramsey delay in ns."""
        if self.ramsey_tau is not None:
            return self.ramsey_tau
        return self.T2_star / np.sqrt(2.0)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


def electron_ops():
    """Return ``(Sx, Sy, Sz, sigma_plus, sigma_minus, sigma_x, sigma_z)``."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |up><down|
    sm = sp.conj().T
    return sx / 2, sy / 2, sz / 2, sp, sm, sx, sz


def nuclear_ladder(levels: int = LADDER_LEVELS):
    """Truncated collective ladder.

    Returns ``(Iz, M)`` where ``Iz = diag(-2..2)`` and ``M[(+1, k)]`` raises the
    level by ``k`` with unit amplitude (top ``k`` levels annihilated),
    ``M[(-1, k)]`` is its adjoint.
    """
    if levels != LADDER_LEVELS:
        raise ValueError(f"only a {LADDER_LEVELS}-level truncation is supported, got {levels}")
    half = levels // 2
    iz = np.diag(np.arange(-half, half + 1)).astype(complex)
    ladder = {}
    for k in (1, 2):
        up = np.eye(levels, k=-k, dtype=complex)  # |l+k><l|
        ladder[(+1, k)] = up
        ladder[(-1, k)] = up.conj().T
    return iz, ladder


def level_index(l: int) -> int:
    """Index of the ladder level ``I_z + l``."""
    if not -2 <= l <= 2:
        raise ValueError(f"level offset {l} outside the 5-level truncation")
    return l + LADDER_LEVELS // 2


def embed(op: np.ndarray, slot: str) -> np.ndarray:
    """Tensor ``op`` into the 50-dimensional space at ``slot``."""
    if slot not in SLOT_DIMS:
        raise ValueError(f"unknown slot {slot!r}; expected one of {SLOTS}")
    op = np.asarray(op)
    if op.shape != (SLOT_DIMS[slot],) * 2:
        raise ValueError(f"operator of shape {op.shape} does not fit slot {slot!r}")
    factors = [op if s == slot else np.eye(SLOT_DIMS[s]) for s in SLOTS]
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


def basis_state(electron: str = "up", l_as: int = 0, l_in: int = 0) -> np.ndarray:
    """Ket ``|electron, I_z,As + l_as, I_z,In + l_in>`` as a 50-vector."""
    e = np.zeros(ELECTRON_DIM, dtype=complex)
    e[0 if electron == "up" else 1] = 1.0
    a = np.zeros(LADDER_LEVELS, dtype=complex)
    a[level_index(l_as)] = 1.0
    b = np.zeros(LADDER_LEVELS, dtype=complex)
    b[level_index(l_in)] = 1.0
    return np.kron(np.kron(e, a), b)


def initial_state() -> np.ndarray:
    """Prepared density matrix: electron up, both ladders at their central level."""
    psi = basis_state("up", 0, 0)
    return np.outer(psi, psi.conj())


def g_factor(spin) -> float:
    """Quadrupolar magnon scaling factor: 6 for I=3/2, 1584/5 for I=9/2."""
    key = Fraction(spin).limit_denominator(2)
    try:
        return _G_FACTORS[key]
    except KeyError:
        raise ValueError(f"no magnon g-factor for nuclear spin {spin}") from None


def eta(sp: SpeciesParams, k: int) -> float:
    """Dimensionless activated-exchange strength ``eta_{j,k}`` (relative to Omega)."""
    if sp.omega_n == 0:
        raise ValueError(f"{sp.name}: eta undefined for omega_n = 0")
    th = np.deg2rad(sp.theta)
    base = sp.A * sp.B_Q / sp.omega_n**2 * np.sqrt(g_factor(sp.spin) * sp.N)
    if k == 1:
        return base * np.sin(2 * th)
    if k == 2:
        return base / 2 * np.cos(th) ** 2
    raise ValueError(f"magnon order k must be 1 or 2, got {k}")


def noncollinear_coupling(sp: SpeciesParams, k: int) -> float:
    """Hamiltonian coefficient ``A_nc,k`` in MHz: ``eta_1 * w_n`` or ``2 * eta_2 * w_n``."""
    return eta(sp, k) * sp.omega_n * k


def partial_trace(rho: np.ndarray, keep: tuple[str, ...]) -> np.ndarray:
    """Reduce a (..., 50, 50) density matrix onto the slots in ``keep`` (order preserved)."""
    dims = [SLOT_DIMS[s] for s in SLOTS]
    batch = rho.shape[:-2]
    t = rho.reshape(batch + tuple(dims) * 2)
    nb = len(batch)
    # trace out the dropped slots from last to first so axis numbers stay valid
    n = len(SLOTS)
    for i in reversed(range(n)):
        if SLOTS[i] in keep:
            continue
        t = np.trace(t, axis1=nb + i, axis2=nb + i + n)
        n -= 1
    kept = int(np.prod([SLOT_DIMS[s] for s in SLOTS if s in keep]))
    return t.reshape(batch + (kept, kept))
