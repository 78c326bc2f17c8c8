"""Compiled inner loop: interaction-picture RK4 for stacks of density matrices."""
import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True, nogil=True)
def _coupling(r, indptr, indices, hvals, w, fdiss, eblock, jrows, jcols, jvals, joff, hr, out):
    """Weak part of the generator: residual Hamiltonian, dissipators."""
    n = r.shape[0]
    m = n // 2
    for i in range(n):
        for j in range(n):
            hr[i, j] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            h = hvals[p]
            for j in range(n):
                hr[i, j] += h * r[k, j]
    for i in range(n):
        for j in range(n):
            out[i, j] = -1j * w * (hr[i, j] - np.conj(hr[j, i])) + fdiss[i, j] * r[i, j]
    # electron-only jumps a = a_e (x) 1: out[al, ga] += C[al, be, ga, de] * rho[be, de] blockwise
    for al in range(2):
        for be in range(2):
            for ga in range(2):
                for de in range(2):
                    cf = eblock[al, be, ga, de]
                    if cf == 0:
                        continue
                    for i in range(m):
                        for j in range(m):
                            out[al * m + i, ga * m + j] += cf * r[be * m + i, de * m + j]
    for o in range(joff.shape[0] - 1):
        lo = joff[o]
        hi = joff[o + 1]
        for p in range(lo, hi):
            rp = jrows[p]
            cp = jcols[p]
            for q in range(lo, hi):
                out[rp, jrows[q]] += jvals[p, q - lo] * r[cp, jcols[q]]


@nb.njit(cache=True, fastmath=True, nogil=True)
def _sandwich(x, u, tmp, out):
    """``out = U x U^dagger`` for U block-diagonal: 2x2 electron blocks ``u[i]`` per nuclear index."""
    n = x.shape[0]
    m = n // 2
    for i in range(m):
        a0 = u[i, 0, 0]
        a1 = u[i, 0, 1]
        b0 = u[i, 1, 0]
        b1 = u[i, 1, 1]
        for j in range(n):
            x0 = x[i, j]
            x1 = x[m + i, j]
            tmp[i, j] = a0 * x0 + a1 * x1
            tmp[m + i, j] = b0 * x0 + b1 * x1
    for j in range(m):
        a0 = np.conj(u[j, 0, 0])
        a1 = np.conj(u[j, 0, 1])
        b0 = np.conj(u[j, 1, 0])
        b1 = np.conj(u[j, 1, 1])
        for i in range(n):
            y0 = tmp[i, j]
            y1 = tmp[i, m + j]
            out[i, j] = y0 * a0 + y1 * a1
            out[i, m + j] = y0 * b0 + y1 * b1


@nb.njit(cache=True, fastmath=True, nogil=True)
def rk4_run(rho, indptr, indices, hvals, half_u, w, fdiss, eblock, jrows, jcols, jvals, joff, nsteps, h):
    """Advance every state of the stack ``nsteps`` steps of size ``h``, in place.

    RK4 in the interaction picture of the electron-block Hamiltonian:
    ``half_u[b]`` holds its exact half-step propagator as 2x2 blocks, the
    residual couplings and dissipators go through the four RK stages.
    Leading dimensions of 1 in ``half_u`` / ``fdiss`` mean shared by the stack.
    """
    nb_, n, _ = rho.shape
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    sig = np.empty_like(k1)
    tmp = np.empty_like(k1)
    hr = np.empty_like(k1)
    scratch = np.empty_like(k1)
    shared_u = half_u.shape[0] == 1
    shared_f = fdiss.shape[0] == 1
    half = 0.5 * h
    h6 = h / 6.0
    for b in range(nb_):
        r = rho[b]
        u = half_u[0] if shared_u else half_u[b]
        f = fdiss[0] if shared_f else fdiss[b]
        for _ in range(nsteps):
            _coupling(r, indptr, indices, hvals, w, f, eblock, jrows, jcols, jvals, joff, hr, tmp)
            _sandwich(tmp, u, scratch, k1)
            _sandwich(r, u, scratch, sig)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = sig[i, j] + half * k1[i, j]
            _coupling(tmp, indptr, indices, hvals, w, f, eblock, jrows, jcols, jvals, joff, hr, k2)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = sig[i, j] + half * k2[i, j]
            _coupling(tmp, indptr, indices, hvals, w, f, eblock, jrows, jcols, jvals, joff, hr, k3)
            for i in range(n):
                for j in range(n):
                    hr[i, j] = sig[i, j] + h * k3[i, j]
            _sandwich(hr, u, scratch, tmp)
            _coupling(tmp, indptr, indices, hvals, w, f, eblock, jrows, jcols, jvals, joff, hr, k4)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = sig[i, j] + h6 * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j]))
            _sandwich(tmp, u, scratch, r)
            for i in range(n):
                for j in range(n):
                    r[i, j] += h6 * k4[i, j]


@nb.njit(cache=True, fastmath=True)
def amplitude_rk4(g, c, delta, coupling, h, nsteps):
    """RK4 on ``g' = -i k sum(c)``, ``c' = -i (k g + delta c)`` in place; ``k`` and ``delta`` in rad/ns."""
    n = c.shape[0]
    c1 = np.empty(n, np.complex128)
    c2 = np.empty(n, np.complex128)
    c3 = np.empty(n, np.complex128)
    c4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    mi = -1j
    for _ in range(nsteps):
        s = 0j
        for e in range(n):
            s += c[e]
            c1[e] = mi * (coupling * g + delta[e] * c[e])
        g1 = mi * coupling * s
        gt = g + 0.5 * h * g1
        s = 0j
        for e in range(n):
            tmp[e] = c[e] + 0.5 * h * c1[e]
            s += tmp[e]
            c2[e] = mi * (coupling * gt + delta[e] * tmp[e])
        g2 = mi * coupling * s
        gt = g + 0.5 * h * g2
        s = 0j
        for e in range(n):
            tmp[e] = c[e] + 0.5 * h * c2[e]
            s += tmp[e]
            c3[e] = mi * (coupling * gt + delta[e] * tmp[e])
        g3 = mi * coupling * s
        gt = g + h * g3
        s = 0j
        for e in range(n):
            tmp[e] = c[e] + h * c3[e]
            s += tmp[e]
            c4[e] = mi * (coupling * gt + delta[e] * tmp[e])
        g4 = mi * coupling * s
        g = g + h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
        for e in range(n):
            c[e] += h / 6.0 * (c1[e] + 2.0 * c2[e] + 2.0 * c3[e] + c4[e])
    return g
