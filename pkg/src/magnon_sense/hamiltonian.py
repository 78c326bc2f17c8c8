"""Rotating-frame Hamiltonians for the driven electron and its nuclear magnons.

All Hamiltonians are in MHz (ordinary frequency); evolution multiplies by 2*pi.

Sign convention: the nuclear Zeeman term enters as ``+omega_n * I_z``.  With
the electron initialised in spin-up a positive drive detuning
``delta ~ +k*omega_n`` injects an ``I_z + k`` magnon, so the Ramsey-measured
shift ``2*A*dI_z`` carries the sign of the sideband.  The contact term then
pushes each resonance slightly above ``sqrt(k^2 omega_n^2 - Omega^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    SpeciesParams,
    SystemConfig,
    electron_ops,
    embed,
    eta,
    noncollinear_coupling,
    nuclear_ladder,
)

ZEEMAN_SIGN = 1.0


@dataclass(frozen=True)
class DriveSettings:
    Omega: float = 0.0  # MHz
    delta: float = 0.0  # MHz
    delta_overhauser: float = 0.0  # MHz

    def __post_init__(self):
        if self.Omega < 0:
            raise ValueError("Rabi frequency must be >= 0")

    @property
    def delta_eff(self) -> float:
        return self.delta + self.delta_overhauser


def _species_terms(sp: SpeciesParams, slot: str, sz_e: np.ndarray):
    iz, ladder = nuclear_ladder()
    zeeman = ZEEMAN_SIGN * sp.omega_n * embed(iz, slot)
    contact = -2 * sp.A * sz_e @ embed(iz, slot)
    exchange = np.zeros_like(zeeman)
    if sp.B_Q != 0 and sp.N != 0:
        for k in (1, 2):
            a_nc = noncollinear_coupling(sp, k)
            exchange = exchange + a_nc * sz_e @ embed(ladder[(+1, k)] + ladder[(-1, k)], slot)
    return zeeman, contact, exchange


def build_total(cfg: SystemConfig, drive: DriveSettings) -> np.ndarray:
    """Full 50x50 Hamiltonian with the S_z-coupled noncollinear hyperfine term."""
    sx, _, sz, *_ = electron_ops()
    sz_e = embed(sz, "electron")
    h = drive.delta_eff * sz_e + drive.Omega * embed(sx, "electron")
    for sp, slot in ((cfg.As, "As"), (cfg.In, "In")):
        zeeman, contact, exchange = _species_terms(sp, slot, sz_e)
        h = h + zeeman + contact + exchange
    return h


def static_part(cfg: SystemConfig, Omega: float) -> np.ndarray:
    """``build_total`` with zero detuning; add ``delta * Sz`` for the full H.

    Scans share this matrix across every detuning and Overhauser sample.
    """
    return build_total(cfg, DriveSettings(Omega=Omega))


def electron_sz_diagonal() -> np.ndarray:
    """Diagonal of the embedded electron ``S_z`` (length 50, real)."""
    _, _, sz, *_ = electron_ops()
    return np.real(np.diag(embed(sz, "electron")))


def _single_species(op2: np.ndarray, op5: np.ndarray) -> np.ndarray:
    return np.kron(op2, op5)


def build_approx(sp: SpeciesParams, drive: DriveSettings, k: int) -> np.ndarray:
    """Single-species 10x10 Hamiltonian with the drive-activated S_y exchange."""
    sx, sy, sz, *_ = electron_ops()
    iz, ladder = nuclear_ladder()
    e5 = np.eye(5)
    e2 = np.eye(2)
    h = drive.delta_eff * _single_species(sz, e5) + drive.Omega * _single_species(sx, e5)
    h = h + ZEEMAN_SIGN * sp.omega_n * _single_species(e2, iz)
    h = h - 2 * sp.A * _single_species(sz, iz)
    h = h - eta(sp, k) * drive.Omega * _single_species(sy, ladder[(+1, k)] + ladder[(-1, k)])
    return h


def hartmann_hahn_delta(Omega: float, omega_n: float) -> float:
    """Positive detuning satisfying ``Omega**2 + delta**2 = omega_n**2``."""
    if abs(Omega) > omega_n:
        raise ValueError(f"no real Hartmann-Hahn resonance for Omega={Omega} > omega_n={omega_n}")
    return float(np.sqrt(omega_n**2 - Omega**2))
