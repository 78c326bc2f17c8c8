"""Savitzky-Golay smoothing with shrinking one-sided windows at the edges."""
from __future__ import annotations

import numpy as np
from scipy.signal import savgol_coeffs

from .series import TimeSeries


def window_samples(dt: float, window_ns: float) -> int:
    """Odd window length in samples closest to ``window_ns``."""
    w = int(round(window_ns / dt))
    return w if w % 2 else w + 1


def savgol_array(y, window: int, order: int = 3) -> np.ndarray:
    """Local least-squares polynomial smoothing of ``y`` with an odd ``window``.

    Within ``window // 2`` samples of either end the window is truncated to
    the available samples and the fit evaluated off-centre.
    """
    y = np.asarray(y, dtype=float)
    if window % 2 == 0 or window <= order:
        raise ValueError(f"window must be odd and larger than the order ({window=}, {order=})")
    if y.size < window:
        raise ValueError(f"series of length {y.size} is shorter than the window {window}")
    half = window // 2
    out = np.convolve(y, savgol_coeffs(window, order, use="conv"), mode="same")
    for i in range(half):
        length = i + half + 1
        po = min(order, length - 1)
        left = savgol_coeffs(length, po, pos=i, use="dot")
        out[i] = left @ y[:length]
        right = savgol_coeffs(length, po, pos=length - 1 - i, use="dot")
        out[-1 - i] = right @ y[-length:]
    return out


def savgol(series: TimeSeries, order: int = 3, window_ns: float = 300.0) -> TimeSeries:
    window = window_samples(series.dt, window_ns)
    return TimeSeries(series.t0, series.dt, savgol_array(series.values, window, order), dict(series.meta))
