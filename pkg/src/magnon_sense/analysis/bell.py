"""Overlap of the ensemble state with a dressed electron-magnon Bell state."""
from __future__ import annotations

import numpy as np

from ..operators import SLOTS, level_index, partial_trace


def dressed_basis(Omega: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors ``(|up~>, |down~>)`` of ``delta S_z + Omega S_x``; ``sin(theta) = Omega/sqrt(Omega^2+delta^2)``."""
    theta = np.arctan2(Omega, delta)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([c, s], dtype=complex), np.array([-s, c], dtype=complex)


def injected_level(delta: float, k: int) -> int:
    """Ladder offset reached from ``I_z`` when driving the sideband at ``delta``."""
    return k if delta >= 0 else -k


def bell_vectors(Omega: float, delta: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The resonant pair ``|e, I_z>`` and ``|e', I_z +- k>`` in the electron x ladder space.

    ``e`` is the dressed state carrying most of the lab spin-up (``|up~>`` for
    ``delta >= 0``), ``e'`` its partner and the ladder moves by
    :func:`injected_level`.  For ``delta > 0`` this is ``|up~, I_z>, |down~, I_z + k>``.
    """
    up, down = dressed_basis(Omega, delta)
    first, second = (up, down) if delta >= 0 else (down, up)
    n0 = np.zeros(5, dtype=complex)
    n0[level_index(0)] = 1.0
    nk = np.zeros(5, dtype=complex)
    nk[level_index(injected_level(delta, k))] = 1.0
    return np.kron(first, n0), np.kron(second, nk)


def bell_state(Omega: float, delta: float, k: int, phi: float) -> np.ndarray:
    a, b = bell_vectors(Omega, delta, k)
    return (a + np.exp(1j * phi) * b) / np.sqrt(2.0)


def reduce_to_species(chi: np.ndarray, species: str) -> np.ndarray:
    if species not in SLOTS[1:]:
        raise ValueError(f"species must be one of {SLOTS[1:]}, got {species!r}")
    return partial_trace(chi, ("electron", species))


def bell_fidelity(chi: np.ndarray, Omega: float, delta: float, species: str, k: int) -> tuple[float, float]:
    """``max_phi <psi_phi|chi|psi_phi>`` and the maximising phase.

    With ``a, b`` the two Bell components the overlap is
    ``(chi_aa + chi_bb)/2 + Re(exp(i phi) chi_ab)``, maximal at ``phi = -arg(chi_ab)``.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    red = reduce_to_species(chi, species) if chi.shape[-1] != 10 else chi
    a, b = bell_vectors(Omega, delta, k)
    caa = np.real(a.conj() @ red @ a)
    cbb = np.real(b.conj() @ red @ b)
    cab = a.conj() @ red @ b
    phi = float(-np.angle(cab)) if abs(cab) > 0 else 0.0
    F = 0.5 * (caa + cbb) + abs(cab)
    return float(np.clip(F, 0.0, 1.0)), phi


def overlap(chi: np.ndarray, Omega: float, delta: float, species: str, k: int, phi: float) -> float:
    """``<psi_phi|chi|psi_phi>`` at a given phase (numeric cross-check of the closed form)."""
    red = reduce_to_species(chi, species) if chi.shape[-1] != 10 else chi
    psi = bell_state(Omega, delta, k, phi)
    return float(np.real(psi.conj() @ red @ psi))
