"""Lindblad dynamics: collapse operators per experimental stage and a fixed-step
RK4 integrator for (batches of) density matrices.

Rates are in MHz (1/us) and enter the dissipator as-is; the Hamiltonian is in
ordinary MHz and is multiplied by 2*pi.  Integration time is in ns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .hamiltonian import DriveSettings, build_total
from .operators import SystemConfig, electron_ops, embed

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
PER_NS = 1e-3  # MHz -> 1/ns
STAGES = ("drive", "free_precession", "pumping")
LABELS = ("nuclear_dephasing", "electron_dephasing", "drive_relaxation", "pumping")
TRACE_DRIFT_LIMIT = 1e-6
CHECK_EVERY = 200  # steps between trace-drift checks


class NumericalInstabilityError(RuntimeError):
    pass


@dataclass
class DissipatorSet:
    """Collapse operators with their rates folded in as ``sqrt(rate / 2)``."""

    collapse_ops: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.collapse_ops) != len(self.labels):
            raise ValueError("collapse_ops and labels must match in length")
        for lab in self.labels:
            if lab not in LABELS:
                raise ValueError(f"unknown dissipator label {lab!r}")

    def __len__(self):
        return len(self.collapse_ops)

    def has(self, label: str) -> bool:
        return label in self.labels


def effective_gamma_e(cfg: SystemConfig) -> float:
    """Electron pure-dephasing rate; falls back to ``1/T2`` when not calibrated."""
    if cfg.Gamma_e is not None:
        return cfg.Gamma_e
    return 1.0 / (cfg.T2 * PER_NS)


def collapse_set(cfg: SystemConfig, drive: DriveSettings, stage: str) -> DissipatorSet:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    gamma_e = effective_gamma_e(cfg)
    rates = [cfg.As.Gamma_n, cfg.In.Gamma_n, gamma_e, cfg.Gamma_p, drive.Omega, cfg.Q]
    if any(r < 0 for r in rates):
        raise ValueError("negative rate in configuration")

    _, _, _, sp, _, sx, sz = electron_ops()
    ops, labels = [], []
    for sp_, slot in ((cfg.As, "As"), (cfg.In, "In")):
        if sp_.Gamma_n > 0:
            for l in range(5):
                proj = np.zeros((5, 5), dtype=complex)
                proj[l, l] = 1.0
                ops.append(np.sqrt(sp_.Gamma_n / 2) * embed(proj, slot))
                labels.append("nuclear_dephasing")
    if gamma_e > 0:
        ops.append(np.sqrt(gamma_e / 2) * embed(sz, "electron"))
        labels.append("electron_dephasing")
    if stage == "drive" and drive.Omega > 0:
        ops.append(np.sqrt(drive.Omega / (2 * cfg.Q)) * embed(sx, "electron"))
        labels.append("drive_relaxation")
    if stage == "pumping" and cfg.Gamma_p > 0:
        ops.append(np.sqrt(cfg.Gamma_p / 2) * embed(sp, "electron"))
        labels.append("pumping")
    return DissipatorSet(ops, labels)


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, d: DissipatorSet) -> np.ndarray:
    """Right-hand side in MHz units: ``2*pi*i[rho, H] + sum_a D[a](rho)``.

    Reference (unoptimised) form; :class:`Generator` is the fast equivalent.
    """
    rho = np.asarray(rho)
    H = np.asarray(H)
    if rho.shape[-2:] != H.shape[-2:]:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs H {H.shape}")
    out = 1j * TWO_PI * (rho @ H - H @ rho)
    for a in d.collapse_ops:
        if a.shape != H.shape[-2:]:
            raise ValueError("collapse operator dimension mismatch")
        ad = a.conj().T
        ada = ad @ a
        out = out + a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada)
    return out


def _row_monomial(a: np.ndarray):
    """If every row of ``a`` has at most one nonzero, return (rows, cols, values)."""
    nz = a != 0
    if np.any(nz.sum(axis=1) > 1):
        return None
    rows = np.nonzero(nz.any(axis=1))[0]
    cols = np.argmax(nz[rows], axis=1)
    return rows, cols, a[rows, cols]


def _electron_factor(a: np.ndarray):
    """Return ``a_e`` if ``a == kron(a_e, identity)`` with a 2x2 ``a_e``, else None."""
    n = a.shape[0]
    if n % 2:
        return None
    m = n // 2
    a_e = a[::m, ::m]
    return a_e if np.array_equal(a, np.kron(a_e, np.eye(m))) else None


class Generator:
    """Lindblad generator acting on a Hermitian ``(B, n, n)`` stack, per ns.

    The Hamiltonian splits into an electron-block part (every element linking
    ``i`` and ``i`` or ``i +- n/2``: detunings, drive, Zeeman and contact
    energies) and a residual.  The block part is propagated exactly through
    2x2 unitaries per nuclear index; RK4 handles the residual and the
    dissipators.  Diagonal collapse operators and the anticommutators of
    row-monomial ones fold into one elementwise factor; jumps of
    electron-only operators become 2x2 block copies and other row-monomial
    jumps index gathers.  When the residual is real and shared by the whole
    stack and no generic operator is present, :meth:`advance` runs the
    compiled kernel; otherwise it falls back to numpy.
    """

    def __init__(self, H: np.ndarray, d: DissipatorSet):
        H = np.asarray(H, dtype=complex)
        if H.ndim == 2:
            H = H[None]
        n = H.shape[-1]
        if n % 2:
            raise ValueError("Generator expects an electron (x) rest space of even dimension")
        self.dim = n
        m = n // 2
        self._H = H
        self._w = TWO_PI * PER_NS
        idx = np.arange(n)
        block = (idx[:, None] % m) == (idx[None, :] % m)
        resid = np.where(block, 0.0, H)
        # 2x2 electron blocks per nuclear index: blocks[b, i] = H[b][[i, m+i]][:, [i, m+i]]
        t = H.reshape(H.shape[0], 2, m, 2, m)
        ii = np.arange(m)
        self._blocks = np.ascontiguousarray(np.transpose(t[:, :, ii, :, ii], (1, 0, 2, 3)))
        shared = bool(np.all(resid == resid[0]))
        self._resid = resid[0] if shared else resid
        self._real = shared and not np.any(self._resid.imag)
        if self._real:
            rows, cols = np.nonzero(self._resid)
            self._indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int64)
            self._indices = cols.astype(np.int64)
            self._hvals = np.ascontiguousarray(self._resid.real[rows, cols])

        factor = np.zeros((1, n, n), dtype=complex)
        eblock = np.zeros((2, 2, 2, 2), dtype=complex)
        jumps = []
        self._generic = []
        for a in d.collapse_ops:
            a = np.asarray(a, dtype=complex)
            if a.shape != (n, n):
                raise ValueError("collapse operator dimension mismatch")
            ada = a.conj().T @ a
            if np.count_nonzero(a - np.diag(np.diagonal(a))) == 0:
                c = np.diagonal(a)
                factor = factor + PER_NS * (
                    np.outer(c, c.conj()) - 0.5 * (np.abs(c)[:, None] ** 2 + np.abs(c)[None, :] ** 2)
                )
                continue
            if np.count_nonzero(ada - np.diag(np.diagonal(ada))) != 0:
                self._generic.append((a * np.sqrt(PER_NS), ada * PER_NS))
                continue
            nd = np.real(np.diagonal(ada))
            a_e = _electron_factor(a)
            mono = _row_monomial(a)
            if a_e is not None:
                eblock += PER_NS * np.einsum("ab,cd->abcd", a_e, a_e.conj())
            elif mono is not None:
                rows, cols, vals = mono
                jumps.append((rows, cols, PER_NS * np.outer(vals, vals.conj())))
            else:
                self._generic.append((a * np.sqrt(PER_NS), ada * PER_NS))
                continue
            factor = factor - PER_NS * 0.5 * (nd[:, None] + nd[None, :])
        self._fdiss = np.ascontiguousarray(factor)
        self._half = None
        self._eblock = eblock
        self._jumps = jumps
        width = max([len(r) for r, _, _ in jumps], default=1)
        total = sum(len(r) for r, _, _ in jumps)
        self._jrows = np.zeros(total, dtype=np.int64)
        self._jcols = np.zeros(total, dtype=np.int64)
        self._jvals = np.zeros((max(total, 1), width), dtype=complex)
        offs = [0]
        for rows, cols, vv in jumps:
            lo = offs[-1]
            k = len(rows)
            self._jrows[lo:lo + k] = rows
            self._jcols[lo:lo + k] = cols
            self._jvals[lo:lo + k, :k] = vv
            offs.append(lo + k)
        self._joff = np.array(offs, dtype=np.int64)

    @property
    def compiled(self) -> bool:
        return self._real and not self._generic

    @property
    def stack_size(self) -> int:
        return self._H.shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Full time derivative (per ns) of a ``(B, n, n)`` stack (numpy reference)."""
        rho = np.asarray(rho, dtype=complex)
        H = self._H
        out = -1j * self._w * (H @ rho - rho @ H)
        return out + self._dissipate(rho)

    def _dissipate(self, rho):
        out = self._fdiss * rho
        m = self.dim // 2
        if np.any(self._eblock):
            blocks = rho.reshape(rho.shape[0], 2, m, 2, m)
            out = out + np.einsum("abcd,xbidj->xaicj", self._eblock, blocks).reshape(rho.shape)
        for rows, cols, vv in self._jumps:
            out[:, rows[:, None], rows[None, :]] += vv * rho[:, cols[:, None], cols[None, :]]
        for a, ada in self._generic:
            t = ada @ rho
            out = out + a @ rho @ a.conj().T - 0.5 * (t + np.conj(np.swapaxes(t, -1, -2)))
        return out

    def coupling(self, rho: np.ndarray) -> np.ndarray:
        """The generator minus its electron-block Hamiltonian part."""
        hr = np.matmul(self._resid, rho)
        return -1j * self._w * (hr - np.conj(np.swapaxes(hr, -1, -2))) + self._dissipate(rho)

    def half_propagator(self, h: float) -> np.ndarray:
        """``exp(-i w H_block h/2)`` as ``(B, m, 2, 2)`` blocks."""
        if self._half is None or self._half[0] != h:
            E, V = np.linalg.eigh(self._blocks)
            ph = np.exp(-1j * self._w * E * (0.5 * h))
            U = np.einsum("...ik,...k,...jk->...ij", V, ph, V.conj())
            self._half = (h, np.ascontiguousarray(U))
        return self._half[1]

    @staticmethod
    def _sandwich(x, U):
        B, n, _ = x.shape
        m = n // 2
        t = x.reshape(B, 2, m, 2, m)
        y = np.einsum("bipq,bqicj->bpicj", U, t)
        z = np.einsum("bpisj,bjrs->bpirj", y, U.conj())
        return z.reshape(B, n, n)

    def advance(self, rho: np.ndarray, nsteps: int, h: float, use_kernel: bool = True) -> None:
        """Take ``nsteps`` steps of ``h`` ns on the stack ``rho`` in place.

        ``use_kernel=False`` forces the numpy path (reference for the compiled one).
        """
        if self.stack_size not in (1, rho.shape[0]) or self._fdiss.shape[0] not in (1, rho.shape[0]):
            raise ValueError("Hamiltonian stack does not match the state stack")
        U = self.half_propagator(h)
        if use_kernel and self.compiled:
            _kernels.rk4_run(rho, self._indptr, self._indices, self._hvals, U, self._w, self._fdiss,
                             self._eblock, self._jrows, self._jcols, self._jvals, self._joff, nsteps, h)
            return
        if U.shape[0] != rho.shape[0]:
            U = np.broadcast_to(U, (rho.shape[0],) + U.shape[1:])
        P = self._sandwich
        for _ in range(nsteps):
            sig = P(rho, U)
            k1 = P(self.coupling(rho), U)
            k2 = self.coupling(sig + (0.5 * h) * k1)
            k3 = self.coupling(sig + (0.5 * h) * k2)
            k4 = self.coupling(P(sig + h * k3, U))
            rho[...] = P(sig + (h / 6.0) * (k1 + 2.0 * (k2 + k3)), U) + (h / 6.0) * k4


@dataclass
class Trajectory:
    """Sampled states; ``states[i]`` has shape ``(B, n, n)`` or ``(n, n)``."""

    times: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _trace(rho):
    return np.real(np.trace(rho, axis1=-2, axis2=-1))


def integrate(rho0, gen: Generator, duration: float, dt: float, sample_steps=None):
    """RK4 from ``rho0`` (stack) for ``duration`` ns; returns (final, samples dict).

    ``sample_steps`` is an iterable of step indices at which to copy the state.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    rho = np.array(rho0, dtype=complex, copy=True, order="C")
    nsteps = max(1, int(round(duration / dt))) if duration > 0 else 0
    samples = {}
    wanted = set(sample_steps or ())
    if 0 in wanted:
        samples[0] = rho.copy()
    if nsteps == 0:
        return rho, samples
    h = duration / nsteps
    tr0 = _trace(rho)
    marks = sorted({s for s in wanted if 0 < s <= nsteps} | set(range(CHECK_EVERY, nsteps, CHECK_EVERY)) | {nsteps})
    step = 0
    for mark in marks:
        gen.advance(rho, mark - step, h)
        step = mark
        drift = np.max(np.abs(_trace(rho) - tr0))
        if not np.isfinite(drift) or drift > TRACE_DRIFT_LIMIT:
            raise NumericalInstabilityError(
                f"trace drift {drift:.3e} at step {step} (t = {step * h:.3f} ns, dt = {h} ns); "
                "reduce dt"
            )
        if step in wanted:
            samples[step] = rho.copy()
    return rho, samples


def evolve(rho0, H, d: DissipatorSet, duration: float, dt: float, sample_dt: float | None = None) -> Trajectory:
    """Integrate the master equation, sampling every ``sample_dt`` ns.

    ``rho0`` may be a single ``(n, n)`` matrix or a ``(B, n, n)`` stack; ``H``
    may be shared or stacked the same way.  Without ``sample_dt`` only the
    initial and final states are returned.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    stack = rho0[None] if single else rho0
    gen = Generator(H, d)
    nsteps = int(round(duration / dt)) if duration > 0 else 0
    h = duration / nsteps if nsteps else dt
    if sample_dt is None:
        every = max(nsteps, 1)
    else:
        ratio = sample_dt / h
        every = int(round(ratio))
        if every < 1 or abs(ratio - every) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"sample_dt={sample_dt} is not a multiple of the step {h}")
    steps = sorted(set(range(0, nsteps + 1, every)) | {nsteps})
    _, samples = integrate(stack, gen, duration, dt, steps)
    times = np.array([s * h for s in steps]) if nsteps else np.array([0.0])
    states = np.array([samples[s] for s in steps]) if nsteps else stack[None].copy()
    if single:
        states = states[:, 0]
    return Trajectory(times, states)


def check_density(rho: np.ndarray, trace_tol=1e-9, herm_tol=1e-9, pos_tol=1e-7) -> dict:
    """Return invariant defects of a density matrix (or stack); raises if violated."""
    rho = np.asarray(rho)
    tr = np.max(np.abs(_trace(rho) - 1.0))
    herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))
    hermitian_part = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    mineig = np.min(np.linalg.eigvalsh(hermitian_part))
    report = {"trace_defect": float(tr), "hermiticity_defect": float(herm), "min_eigenvalue": float(mineig)}
    if tr > trace_tol or herm > herm_tol or mineig < -pos_tol:
        raise ValueError(f"density-matrix invariant violated: {report}")
    return report


def _rotation(axis_phi: float, angle: float) -> np.ndarray:
    sx, sy, *_ = electron_ops()
    n = np.cos(axis_phi) * sx + np.sin(axis_phi) * sy
    # exp(-i angle n.S) with (n.S)^2 = 1/4
    return np.cos(angle / 2) * np.eye(2) - 2j * np.sin(angle / 2) * n


def hahn_echo_amplitude(cfg: SystemConfig, total_time: float, gamma_e: float) -> float:
    """Echo coherence |<S_+>|*2 after (pi/2)_x - T/2 - pi_x - T/2, single Overhauser sample."""
    from .operators import initial_state

    c = cfg.with_(Gamma_e=gamma_e)
    drive = DriveSettings()
    H = build_total(c, drive)
    d = collapse_set(c, drive, "free_precession")
    gen = Generator(H, d)
    u_half = embed(_rotation(0.0, np.pi / 2), "electron")
    u_pi = embed(_rotation(0.0, np.pi), "electron")
    rho = (u_half @ initial_state() @ u_half.conj().T)[None]
    rho, _ = integrate(rho, gen, total_time / 2, c.dt)
    rho = u_pi @ rho @ u_pi.conj().T
    rho, _ = integrate(rho, gen, total_time / 2, c.dt)
    _, _, _, splus, *_ = electron_ops()
    coh = np.trace(embed(splus, "electron") @ rho[0])
    return float(2 * abs(coh))


def calibrate_gamma_e(cfg: SystemConfig, T2: float | None = None, xtol: float = 1e-5) -> float:
    """Bisect ``Gamma_e`` (nuclear rates fixed) so the echo decays to 1/e at ``T2``."""
    T2 = cfg.T2 if T2 is None else T2
    target = np.exp(-1.0)

    def miss(g):
        return hahn_echo_amplitude(cfg, T2, g) - target

    hi = 2.0 / (T2 * PER_NS)
    if miss(0.0) < 0:
        log.warning("echo already below 1/e without electron dephasing; Gamma_e -> 0")
        return 0.0
    return float(brentq(miss, 0.0, hi, xtol=xtol))
