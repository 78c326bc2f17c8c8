"""Pulse sequences: Ramsey reference, magnon drive, Ramsey sense.

Each Overhauser-grid sample is one member of a batched density-matrix stack,
so a whole ensemble shares a single integration.  Ensemble averages are
weighted sums over that stack.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis.bell import injected_level
from .hamiltonian import DriveSettings, electron_sz_diagonal, static_part
from .master_equation import (
    PER_NS,
    TWO_PI,
    Generator,
    _rotation,
    collapse_set,
    integrate,
)
from .operators import (
    LADDER_LEVELS,
    SystemConfig,
    embed,
    initial_state,
    level_index,
    partial_trace,
)

log = logging.getLogger(__name__)

AXIS_AZIMUTH = {"x": 0.0, "y": np.pi / 2, "-y": -np.pi / 2}
GRID_HALF_WIDTH = 4.0  # in units of sigma_delta
_SZ = electron_sz_diagonal()
_NUC = LADDER_LEVELS * LADDER_LEVELS


# ---------------------------------------------------------------- ensemble grid


@dataclass(frozen=True)
class OverhauserGrid:
    deltas: np.ndarray  # MHz
    weights: np.ndarray
    sigma_delta: float  # MHz

    def __len__(self):
        return len(self.deltas)

    def mean(self, values: np.ndarray) -> np.ndarray:
        """Weighted average over the leading (sample) axis, fixed summation order."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def overhauser_sigma(T2_star: float) -> float:
    """Ordinary-frequency width (MHz) of the cooled Overhauser distribution.

    The angular width is sqrt(2)/T2*, which makes the ensemble-averaged
    coherence decay as exp(-(tau/T2*)**2).
    """
    return np.sqrt(2.0) / (TWO_PI * T2_star * PER_NS)


def make_overhauser_grid(cfg: SystemConfig, n: int | None = None) -> OverhauserGrid:
    n = cfg.ensemble_samples if n is None else n
    if n < 1 or n % 2 == 0:
        raise ValueError(f"Overhauser grid size must be odd and >= 1, got {n}")
    sigma = overhauser_sigma(cfg.T2_star)
    if n == 1:
        return OverhauserGrid(np.zeros(1), np.ones(1), sigma)
    x = np.linspace(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, n)
    w = np.exp(-0.5 * x**2)
    return OverhauserGrid(x * sigma, w / w.sum(), sigma)


# ---------------------------------------------------------------- elementary stages


@dataclass(frozen=True)
class PulseSegment:
    """One stage of a sequence; build with the ``rotation``/``free``/``drive``/``reinit`` helpers."""

    kind: str
    axis: str = "x"
    angle: float = 0.0  # rad
    phase: float = 0.0  # rad, added to the rotation-axis azimuth
    duration: float = 0.0  # ns
    delta_free: float = 0.0  # MHz
    Omega: float = 0.0  # MHz
    delta: float = 0.0  # MHz

    def __post_init__(self):
        if self.kind not in ("rotation", "free", "drive", "reinit"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.kind == "rotation":
            if self.axis not in AXIS_AZIMUTH:
                raise ValueError(f"rotation axis must be one of {tuple(AXIS_AZIMUTH)}")
            if not -2 * np.pi < self.angle <= 2 * np.pi:
                raise ValueError("rotation angle must lie in (-2pi, 2pi]")
        if self.duration < 0:
            raise ValueError("segment duration must be >= 0")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")

    @classmethod
    def rotation(cls, axis: str, angle: float, phase: float = 0.0) -> "PulseSegment":
        return cls("rotation", axis=axis, angle=angle, phase=phase)

    @classmethod
    def free(cls, duration: float, delta_free: float = 0.0) -> "PulseSegment":
        return cls("free", duration=duration, delta_free=delta_free)

    @classmethod
    def drive_segment(cls, Omega: float, delta: float, duration: float) -> "PulseSegment":
        return cls("drive", Omega=Omega, delta=delta, duration=duration)

    @classmethod
    def reinit(cls) -> "PulseSegment":
        return cls("reinit")


def _stack(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return rho[None] if rho.ndim == 2 else rho


def _unstack(like: np.ndarray, out: np.ndarray) -> np.ndarray:
    return out[0] if np.asarray(like).ndim == 2 else out


def rotate(rho: np.ndarray, axis: str, angle: float, phase: float = 0.0) -> np.ndarray:
    """Instantaneous electron rotation ``exp(-i angle n.S)``; ``phase`` shifts the axis azimuth."""
    if axis not in AXIS_AZIMUTH:
        raise ValueError(f"rotation axis must be one of {tuple(AXIS_AZIMUTH)}")
    u = embed(_rotation(AXIS_AZIMUTH[axis] + phase, angle), "electron")
    st = _stack(rho)
    return _unstack(rho, u @ st @ u.conj().T)


def electron_populations(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(rho_up_up, rho_down_down)`` for a single state or a stack."""
    d = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    return d[..., :_NUC].sum(-1), d[..., _NUC:].sum(-1)


def polarization(rho: np.ndarray) -> np.ndarray:
    """``S = rho_dd - rho_uu``."""
    up, down = electron_populations(rho)
    return down - up


def level_populations(rho: np.ndarray, species: str) -> np.ndarray:
    """Populations of the five ladder levels ``I_z + l``, ``l = -2..2``."""
    red = partial_trace(rho, (species,))
    return np.real(np.diagonal(red, axis1=-2, axis2=-1))


def mean_level(rho: np.ndarray, species: str) -> np.ndarray:
    """``<I_z> - I_z`` of one species (offset from the prepared level)."""
    return level_populations(rho, species) @ np.arange(-2, 3)


def _generator(cfg: SystemConfig, Omega: float, detunings: np.ndarray, stage: str) -> Generator:
    base = static_part(cfg, Omega)
    det = np.atleast_1d(np.asarray(detunings, dtype=float))
    H = np.repeat(base[None], len(det), axis=0)
    idx = np.arange(base.shape[0])
    H[:, idx, idx] += det[:, None] * _SZ[None, :]
    return Generator(H, collapse_set(cfg, DriveSettings(Omega=Omega), stage))


def _free(stack: np.ndarray, cfg: SystemConfig, detunings: np.ndarray, duration: float) -> np.ndarray:
    if duration == 0:
        return stack.copy()
    gen = _generator(cfg, 0.0, detunings, "free_precession")
    out, _ = integrate(stack, gen, duration, cfg.dt)
    return out


def shift_from_polarization(S, tau: float, T2_star: float, with_flag: bool = False):
    """Invert ``S = exp(-(tau/T2*)^2) sin(2 pi tau dw)`` for ``dw`` in MHz.

    Out-of-range arguments are clipped to +-1; with ``with_flag=True`` a
    boolean saturation mask is returned alongside.
    """
    if tau <= 0:
        raise ValueError("Ramsey delay must be positive")
    arg = np.asarray(S, dtype=float) * np.exp((tau / T2_star) ** 2)
    saturated = np.abs(arg) > 1.0
    dw = np.arcsin(np.clip(arg, -1.0, 1.0)) / (TWO_PI * tau * PER_NS)
    if np.ndim(dw) == 0:
        dw, saturated = float(dw), bool(saturated)
    return (dw, saturated) if with_flag else dw


def _ramsey_stack(stack, detunings, tau, mode, delta_free, cfg):
    if tau < 0:
        raise ValueError("Ramsey delay must be >= 0")
    if mode not in ("side", "top"):
        raise ValueError(f"Ramsey mode must be 'side' or 'top', got {mode!r}")
    st = rotate(stack, "x", np.pi / 2)
    st = _free(st, cfg, detunings, tau)
    phase = TWO_PI * delta_free * tau * PER_NS
    st = rotate(st, "-y" if mode == "side" else "x", np.pi / 2, phase)
    return polarization(st), st


def ramsey(
    rho: np.ndarray,
    tau: float,
    mode: str,
    delta_free: float,
    cfg: SystemConfig,
    grid: OverhauserGrid | None = None,
    detuning: float = 0.0,
):
    """Ramsey interferometer on the electron; returns ``(S, rho_out)``.

    ``rho`` is either one state (copied to every grid sample) or a stack with
    one conditional state per sample.  ``S`` is the grid-weighted average and
    ``rho_out`` the stack of conditional final states.  ``detuning`` adds a
    constant electron detuning (MHz) on top of each grid sample.
    """
    grid = grid if grid is not None else make_overhauser_grid(cfg, 1)
    st = _stack(rho)
    if st.shape[0] == 1 and len(grid) > 1:
        st = np.repeat(st, len(grid), axis=0)
    if st.shape[0] != len(grid):
        raise ValueError("state stack does not match the Overhauser grid")
    S, out = _ramsey_stack(st, grid.deltas + detuning, tau, mode, delta_free, cfg)
    return float(grid.mean(S)), out


def reinitialize_electron(
    rho: np.ndarray,
    method: str = "project",
    duration: float | None = None,
    cfg: SystemConfig | None = None,
    detunings=0.0,
) -> np.ndarray:
    """Reset the electron to spin-up.

    ``project`` swaps the electron factor for ``|up><up|`` keeping the nuclear
    reduced state; ``pump`` integrates the optical-pumping stage for
    ``duration`` ns (default ``cfg.pump_time``).
    """
    st = _stack(rho)
    if method == "project":
        t = st.reshape(st.shape[0], 2, _NUC, 2, _NUC)
        out = np.zeros_like(t)
        out[:, 0, :, 0, :] = t[:, 0, :, 0, :] + t[:, 1, :, 1, :]
        return _unstack(rho, out.reshape(st.shape))
    if method == "pump":
        if cfg is None:
            raise ValueError("pump reinitialization needs a config")
        duration = cfg.pump_time if duration is None else duration
        if duration == 0:
            return np.array(rho, dtype=complex, copy=True)
        det = np.broadcast_to(np.asarray(detunings, dtype=float), (st.shape[0],))
        gen = _generator(cfg, 0.0, det, "pumping")
        out, _ = integrate(st, gen, duration, cfg.dt)
        return _unstack(rho, out)
    raise ValueError(f"unknown reinitialization method {method!r}")


def _reinit(stack, cfg, detunings):
    return reinitialize_electron(stack, cfg.reinit, cfg=cfg, detunings=detunings)


def magnon_drive(
    rho: np.ndarray,
    Omega: float,
    delta: float,
    T: float,
    cfg: SystemConfig,
    grid_sample_delta=0.0,
) -> np.ndarray:
    """Evolve under the driven Hamiltonian with drive-stage dissipators for ``T`` ns.

    ``grid_sample_delta`` may be a scalar or one Overhauser offset per stacked state.
    """
    if T < 0:
        raise ValueError("drive time must be >= 0")
    st = _stack(rho)
    det = delta + np.broadcast_to(np.asarray(grid_sample_delta, dtype=float), (st.shape[0],))
    if T == 0:
        return np.array(rho, dtype=complex, copy=True)
    out, _ = integrate(st, _generator(cfg, Omega, det, "drive"), T, cfg.dt)
    return _unstack(rho, out)


def run_sequence(
    rho: np.ndarray,
    segments: Sequence[PulseSegment],
    cfg: SystemConfig,
    grid: OverhauserGrid | None = None,
) -> np.ndarray:
    """Apply segments in order to every grid sample; returns the conditional stack."""
    grid = grid if grid is not None else make_overhauser_grid(cfg, 1)
    st = _stack(rho)
    if st.shape[0] == 1 and len(grid) > 1:
        st = np.repeat(st, len(grid), axis=0)
    for seg in segments:
        if seg.kind == "rotation":
            st = rotate(st, seg.axis, seg.angle, seg.phase)
        elif seg.kind == "free":
            st = _free(st, cfg, grid.deltas, seg.duration)
        elif seg.kind == "drive":
            st = magnon_drive(st, seg.Omega, seg.delta, seg.duration, cfg, grid.deltas)
        else:
            st = _reinit(st, cfg, grid.deltas)
    return st


# ---------------------------------------------------------------- scans


@dataclass
class SequenceResult:
    """Outcome of the reference / drive / sense protocol at one (delta, T)."""

    delta: float
    T: float
    S_ref: float
    S_sense: float
    dw_ref: float
    dw_sense: float
    S_drive: float  # electron polarization right after the drive
    chi_drive: np.ndarray  # ensemble state right after the drive
    chi: np.ndarray  # ensemble state at the end of the sense Ramsey
    saturated: bool = False
    per_sample_S_sense: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dw_D(self) -> float:
        return self.dw_sense - self.dw_ref

    def level_populations(self, species: str) -> np.ndarray:
        return level_populations(self.chi_drive, species)

    def rho_k(self, species: str, k: int) -> float:
        """Population of the injected level ``I_z +- k`` after the drive."""
        return float(self.level_populations(species)[level_index(injected_level(self.delta, k))])


class _Protocol:
    """Shared state for the four-stage protocol at fixed drive strength."""

    def __init__(self, cfg: SystemConfig, Omega: float, grid: OverhauserGrid | None):
        self.cfg = cfg
        self.Omega = Omega
        self.grid = grid if grid is not None else make_overhauser_grid(cfg)
        self.tau = cfg.tau

    def shift(self, S):
        return shift_from_polarization(S, self.tau, self.cfg.T2_star, with_flag=True)

    def reference(self, extra: float = 0.0):
        """Reference Ramsey on the prepared state, then reinit; returns (S_ref, stack)."""
        det = self.grid.deltas + extra
        st = np.repeat(initial_state()[None], len(self.grid), axis=0)
        S, st = _ramsey_stack(st, det, self.tau, "side", self.cfg.delta_free, self.cfg)
        return float(self.grid.mean(S)), _reinit(st, self.cfg, det)

    def sense(self, driven: np.ndarray, extra: float = 0.0):
        det = self.grid.deltas + extra
        st = _reinit(driven, self.cfg, det)
        S, st = _ramsey_stack(st, det, self.tau, "side", self.cfg.delta_free, self.cfg)
        return S, st

    def result(self, delta, T, S_ref, driven, extra=0.0) -> SequenceResult:
        S_b, st = self.sense(driven, extra)
        S_sense = float(self.grid.mean(S_b))
        dw_ref, sat_r = self.shift(S_ref)
        dw_sense, sat_s = self.shift(S_sense)
        chi_drive = self.grid.mean(driven)
        return SequenceResult(
            delta=float(delta),
            T=float(T),
            S_ref=S_ref,
            S_sense=S_sense,
            dw_ref=dw_ref,
            dw_sense=dw_sense,
            S_drive=float(polarization(chi_drive)),
            chi_drive=chi_drive,
            chi=self.grid.mean(st),
            saturated=bool(sat_r or sat_s),
            per_sample_S_sense=S_b,
        )


def spectrum_scan(
    cfg: SystemConfig,
    Omega: float,
    T_drive: float,
    deltas: Sequence[float],
    grid: OverhauserGrid | None = None,
    progress: Callable[[int, SequenceResult], None] | None = None,
) -> list[SequenceResult]:
    """Reference Ramsey, reinit, drive at each ``delta``, reinit, sense Ramsey."""
    deltas = list(deltas)
    if not deltas:
        raise ValueError("spectrum_scan needs at least one detuning")
    if T_drive < 0:
        raise ValueError("drive time must be >= 0")
    proto = _Protocol(cfg, Omega, grid)
    S_ref, prepared = proto.reference()
    results = []
    for i, delta in enumerate(deltas):
        gen = _generator(cfg, Omega, delta + proto.grid.deltas, "drive")
        driven, _ = integrate(prepared, gen, T_drive, cfg.dt)
        res = proto.result(delta, T_drive, S_ref, driven)
        results.append(res)
        if progress is not None:
            progress(i, res)
    return results


def time_scan(
    cfg: SystemConfig,
    Omega: float,
    delta: float,
    times: Sequence[float],
    dnp_feed: Callable[[float], float] | None = None,
    grid: OverhauserGrid | None = None,
    progress: Callable[[int, SequenceResult], None] | None = None,
) -> list[SequenceResult]:
    """The four-stage protocol at fixed ``delta`` for each drive time in ``times``.

    Without a feed, one drive trajectory is branched at every ``T``.  With
    ``dnp_feed`` (a callable giving the reference shift in MHz at drive time
    ``T``) every shot is simulated separately with an extra electron
    detuning of ``-dnp_feed(T)`` in all stages, so that the simulated
    reference shift tracks the fed curve.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("time_scan needs at least one drive time")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("drive times must be ascending and >= 0")
    proto = _Protocol(cfg, Omega, grid)
    results = []
    if dnp_feed is None:
        S_ref, st = proto.reference()
        gen = _generator(cfg, Omega, delta + proto.grid.deltas, "drive")
        t_now = 0.0
        for i, T in enumerate(times):
            if T > t_now:
                st, _ = integrate(st, gen, T - t_now, cfg.dt)
                t_now = T
            res = proto.result(delta, T, S_ref, st)
            results.append(res)
            if progress is not None:
                progress(i, res)
        return results
    for i, T in enumerate(times):
        extra = -float(dnp_feed(T))
        S_ref, st = proto.reference(extra)
        gen = _generator(cfg, Omega, delta + extra + proto.grid.deltas, "drive")
        if T > 0:
            st, _ = integrate(st, gen, T, cfg.dt)
        res = proto.result(delta, T, S_ref, st, extra)
        results.append(res)
        if progress is not None:
            progress(i, res)
    return results
