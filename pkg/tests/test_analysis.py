import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnon_sense.analysis import (
    DnpParams,
    FitError,
    ShoParams,
    TimeSeries,
    allan_deviation,
    bell_fidelity,
    differential_slope,
    dnp_model,
    dressed_basis,
    fit_dnp,
    fit_power_law,
    fit_sho,
    fixed_point_residual,
    levenberg_marquardt,
    loglog_slope,
    neff_curve,
    neff_solve,
    savgol,
    savgol_array,
    sho_analytic,
    sho_oracle,
    sho_response,
)
from magnon_sense.analysis.bell import bell_state, overlap
from magnon_sense.analysis.sho import exponents, lorentzian_detunings, sho_amplitude, sho_eigen
from magnon_sense.analysis.smoothing import window_samples

W = 2 * np.pi * 1e-3  # MHz * ns -> rad


# ---------------------------------------------------------------- SHO model


def test_sho_response_limits():
    p = ShoParams(0.3, 0.0, 2.0)
    T = np.linspace(0, 2000, 101)
    assert sho_response(p, 0.0) == 0.0
    assert np.allclose(sho_response(p, T), 0.3 * (1 - np.cos(W * 2.0 * T)))
    with pytest.raises(ValueError):
        sho_response(p, -1.0)
    with pytest.raises(ValueError):
        ShoParams(1.0, -0.1, 1.0)


def test_sho_overdamped_rate():
    G, Oe = 5.0, 0.5
    lam = -G + np.sqrt(G**2 - Oe**2)  # slow root, MHz
    T = np.linspace(400, 3000, 30)
    y = sho_response(ShoParams(1.0, G, Oe), T)
    assert np.all(np.diff(y) > 0) and np.all(y < 1)
    rate = np.polyfit(W * T, np.log(1 - y), 1)[0]
    assert rate == pytest.approx(lam, rel=1e-6)


@given(G=st.floats(0.01, 20.0), T=st.floats(0.0, 5000.0))
@settings(max_examples=200, deadline=None)
def test_sho_continuous_at_critical_damping(G, T):
    eps = 1e-13 * G
    lo = sho_response(ShoParams(1.0, G, G - eps), T)
    hi = sho_response(ShoParams(1.0, G, G + eps), T)
    at = sho_response(ShoParams(1.0, G, G), T)
    assert abs(lo - hi) < 1e-9 and abs(at - lo) < 1e-9


# ---------------------------------------------------------------- oracle


def test_oracle_trivial_cases():
    t = np.linspace(0, 500, 51)
    assert np.allclose(sho_oracle(20, 0.0, 1.0, t).values, 1.0)
    one = sho_oracle(1, 0.7, 1.0, t, detunings=np.zeros(1))
    assert np.allclose(one.values, np.cos(W * 0.7 * t) ** 2, atol=1e-9)
    assert one.meta["seed"] == 0
    with pytest.raises(ValueError):
        sho_oracle(0, 1.0, 1.0, t)
    with pytest.raises(ValueError):
        sho_oracle(3, 1.0, 1.0, t[::-1])


def test_oracle_matches_exact_diagonalisation():
    N, op, D = 40, 0.3, 1.5
    det = lorentzian_detunings(N, D, 7)
    t = np.linspace(0, 800, 41)
    rk = sho_oracle(N, op, D, t, detunings=det)
    exact = sho_eigen(N, op, D, t, det)
    # RK4 step error of the oracle, far below the 5% comparisons it serves
    assert np.allclose(rk.meta["amplitude"], exact, atol=1e-5)


def test_lorentzian_sampling_half_width():
    d = lorentzian_detunings(200001, 2.0, 3)
    q1, q3 = np.percentile(d, [25, 75])
    assert (q3 - q1) / 2 == pytest.approx(2.0, rel=0.01)


def test_analytic_solution_obeys_the_oscillator_equation():
    N, op, D = 500, 4 * 0.8 / np.sqrt(500), 0.8
    t = np.linspace(0, 6000, 60001)
    a = sho_amplitude(N, op, D, t)
    h = t[1] - t[0]
    d1 = np.gradient(a, h)
    d2 = np.gradient(d1, h)
    lhs = d2[5:-5]
    rhs = (-N * (W * op) ** 2 * a - W * D * d1)[5:-5]
    assert np.max(np.abs(lhs - rhs)) < 1e-5 * np.max(np.abs(rhs))
    assert a[0] == pytest.approx(1.0)
    # a'(0) = 0: the closed form is even in t to third order in the step
    eps = 1e-3
    assert abs(sho_amplitude(N, op, D, eps) - sho_amplitude(N, op, D, -eps)) < 1e-9
    lp, lm = exponents(N, op, D)
    assert (lp + lm).real == pytest.approx(-W * D)


def test_oracle_vs_analytic_moderate_size():
    N, D = 300, 1.0
    op = 2 * D / np.sqrt(N)
    t = np.linspace(0, 5000 / D, 201)
    rk = sho_oracle(N, op, D, t, rng_seed=2)
    rms = np.sqrt(np.mean((rk.values - sho_analytic(N, op, D, t)) ** 2))
    assert rms < 0.05


# ---------------------------------------------------------------- fit_sho


@pytest.mark.parametrize(
    "p", [ShoParams(0.25, 0.3, 1.7), ShoParams(-0.12, 1.1, 0.4), ShoParams(0.2, 0.05, 0.9)]
)
def test_fit_sho_recovers_noiseless_parameters(p):
    T = np.linspace(0, 3000, 121)
    fit = fit_sho(TimeSeries(0.0, T[1], sho_response(p, T)))
    got = np.array([fit.params.omega0, fit.params.Gamma, fit.params.Omega_exc])
    want = np.array([p.omega0, p.Gamma, p.Omega_exc])
    assert np.allclose(got, want, rtol=1e-6)
    assert not fit.degenerate and np.all(np.isfinite(fit.stderr))


def test_fit_sho_flags_constant_series():
    fit = fit_sho(TimeSeries(0.0, 10.0, np.full(50, 0.2)))
    assert fit.degenerate
    with pytest.raises(FitError):
        fit_sho(TimeSeries(0.0, 1.0, np.ones(5)))


def test_fit_sho_on_oracle_output():
    N, D = 500, 1.0
    op = 4 * D / np.sqrt(N)
    t = np.linspace(0, 5000 / D, 251)
    amp = sho_oracle(N, op, D, t, rng_seed=1).meta["amplitude"]
    fit = fit_sho(TimeSeries(0.0, t[1], 1 - amp.real))
    assert fit.params.Omega_exc == pytest.approx(np.sqrt(N) * op, rel=0.05)
    assert fit.params.Gamma == pytest.approx(D / 2, rel=0.15)


# ---------------------------------------------------------------- least squares


def test_levenberg_marquardt_exponential():
    x = np.linspace(0, 4, 40)
    y = 2.5 * np.exp(-0.7 * x) + 0.1
    fit = levenberg_marquardt(lambda p: p[0] * np.exp(-p[1] * x) + p[2] - y, [1.0, 0.2, 0.0])
    assert np.allclose(fit.params, [2.5, 0.7, 0.1], rtol=1e-8)
    assert fit.converged and fit.residual_norm < 1e-8


def test_levenberg_marquardt_rank_deficiency_and_underdetermined():
    x = np.linspace(0, 1, 10)
    fit = levenberg_marquardt(lambda p: (p[0] + p[1]) * x - x, [0.3, 0.3])
    assert np.all(np.isinf(fit.cov))
    with pytest.raises(FitError):
        levenberg_marquardt(lambda p: np.array([p[0] - 1.0]), [0.0, 0.0])


@given(beta=st.floats(0.5, 3.0), seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_power_law_recovers_planted_exponent(beta, seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(5.0, 35.0, 9)
    y = 0.01 * x**beta * (1 + 0.03 * rng.normal(size=x.size))
    assert fit_power_law(x, y).exponent == pytest.approx(beta, abs=0.1)


# ---------------------------------------------------------------- Allan deviation


def brute_allan(f, n):
    m = len(f)
    total = 0.0
    for j in range(m - 2 * n + 1):
        total += sum(f[i + n] - f[i] for i in range(j, j + n)) ** 2
    return np.sqrt(total / (2 * n**2 * (m - 2 * n + 1)))


def test_allan_hand_cases():
    a = 0.37
    assert allan_deviation([a, -a, a, -a], [1]) == [(1, pytest.approx(a * np.sqrt(2), abs=1e-15))]
    assert all(s == 0 for _, s in allan_deviation(np.full(100, 4.2), [1, 5, 20]))
    with pytest.raises(ValueError):
        allan_deviation(np.ones(10), [5])
    with pytest.raises(ValueError):
        allan_deviation(np.ones(10), [0])


@given(
    f=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40),
    c=st.floats(-1e3, 1e3),
)
@settings(max_examples=150, deadline=None)
def test_allan_matches_direct_sum_and_ignores_offsets(f, c):
    f = np.array(f)
    ns = range(1, (len(f) - 1) // 2 + 1)
    fast = allan_deviation(f, ns)
    shifted = allan_deviation(f + c, ns)
    scale = 1e-9 * (1 + np.max(np.abs(f)) + abs(c))
    for (n, s), (_, s2) in zip(fast, shifted):
        assert s == pytest.approx(brute_allan(f, n), abs=scale)
        assert s2 == pytest.approx(s, abs=scale)


def test_allan_white_noise_slope():
    f = np.random.default_rng(5).normal(size=3600)
    ns = np.unique(np.round(np.logspace(0, 2, 15)).astype(int))
    assert loglog_slope(allan_deviation(f, ns)) == pytest.approx(-0.5, abs=0.05)


# ---------------------------------------------------------------- DNP


def test_dnp_model_limits():
    p = DnpParams(15.0, 0.3, 0.21)
    assert dnp_model(1e12, p) == pytest.approx(0.0, abs=1e-9)
    assert dnp_model(1e12, p, "sense") == pytest.approx(0.21)
    assert dnp_model(0.0, p) == 15.0
    with pytest.raises(ValueError):
        dnp_model(-1.0, p)
    with pytest.raises(ValueError):
        dnp_model(1.0, p, "both")
    with pytest.raises(ValueError):
        DnpParams(1.0, 0.0, 1.0)


@pytest.mark.parametrize("p", [DnpParams(15.0, 0.3, 0.21), DnpParams(9.0, 0.6, 0.2), DnpParams(-4.0, 2.0, -0.1)])
def test_fit_dnp_exact_recovery(p):
    r = np.array([0.1, 0.25, 0.5, 1, 2, 4, 8, 16])
    ref = np.column_stack([r, dnp_model(r, p)])
    sen = np.column_stack([r, dnp_model(r, p, "sense")])
    got = fit_dnp(ref, sen).params
    assert np.allclose([got.a, got.b, got.c], [p.a, p.b, p.c], rtol=1e-6)


def test_fit_dnp_degenerate_inputs():
    r = np.array([1.0, 2.0, 3.0])
    zero = np.column_stack([r, np.zeros(3)])
    got = fit_dnp(zero, zero)
    assert got.params.a == 0 and got.params.c == 0
    flat = np.column_stack([np.ones(3), [1.0, 2.0, 3.0]])
    with pytest.raises(FitError):
        fit_dnp(flat, flat)
    with pytest.raises(FitError):
        fit_dnp(zero[:2], zero)


def test_differential_shift_is_ratio_independent_under_noise():
    rng = np.random.default_rng(11)
    p = DnpParams(15.0, 0.3, 0.21)
    r = np.geomspace(0.5, 40, 12)
    noise = 0.05  # MHz, single-point scatter of the measured shifts
    ref = np.column_stack([r, dnp_model(r, p) + noise * rng.normal(size=r.size)])
    sen = np.column_stack([r, dnp_model(r, p, "sense") + noise * rng.normal(size=r.size)])
    slope, err = differential_slope(ref, sen)
    assert abs(slope) < 3 * err
    fit = fit_dnp(ref, sen)
    assert fit.params.c == pytest.approx(0.21, abs=3 * fit.stderr[2])


# ---------------------------------------------------------------- N_eff


def test_neff_asymptotes():
    N = 1e4
    big = neff_solve(N, 1.0, 1e-3)
    assert big == pytest.approx(N, rel=1e-3)
    D = 1.0
    op = 0.05 * D / np.sqrt(N)
    assert neff_solve(N, op, D) == pytest.approx(np.pi * N**2 * op**2 / D**2, rel=0.02)
    with pytest.raises(ValueError):
        neff_solve(0, 1.0, 1.0)


@given(
    N=st.floats(10.0, 1e6),
    op=st.floats(1e-4, 10.0),
    D=st.floats(0.01, 100.0),
    grow=st.floats(1.0, 3.0),
)
@settings(max_examples=200, deadline=None)
def test_neff_fixed_point_and_monotonicity(N, op, D, grow):
    n = neff_solve(N, op, D)
    assert 0 < n <= N * (1 + 1e-12)
    assert fixed_point_residual(n, N, op, D) < 1e-10
    assert neff_solve(N, op * grow, D) >= n * (1 - 1e-12)
    assert neff_solve(N * grow, op, D) >= n * (1 - 1e-12)


def test_neff_curve_is_superlinear():
    drives = np.linspace(0.001, 0.05, 200)
    curve = neff_curve(2e4, 1.0, drives)
    assert np.all(np.diff(curve[:, 1]) > 0) and np.all(np.diff(curve[:, 2]) > 0)
    exc = curve[:, 2]
    # Omega_exc / Omega' = sqrt(N_eff) grows with the drive
    assert np.all(np.diff(exc / drives) > 0)


# ---------------------------------------------------------------- Bell fidelity


def ladder_state(e_vec, level):
    n = np.zeros(5, dtype=complex)
    n[level + 2] = 1.0
    return np.kron(e_vec, n)


@pytest.mark.parametrize("delta", [24.0, -51.0])
@pytest.mark.parametrize("k", [1, 2])
def test_bell_fidelity_ideal_and_product(delta, k):
    Omega, phi0 = 34.0, 0.8
    psi = bell_state(Omega, delta, k, phi0)
    F, phi = bell_fidelity(np.outer(psi, psi.conj()), Omega, delta, "In", k)
    assert F == pytest.approx(1.0) and np.angle(np.exp(1j * (phi - phi0))) == pytest.approx(0, abs=1e-12)
    up, down = dressed_basis(Omega, delta)
    carrier = ladder_state(up if delta >= 0 else down, 0)
    F, _ = bell_fidelity(np.outer(carrier, carrier.conj()), Omega, delta, "In", k)
    assert F == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bell_fidelity(np.outer(psi, psi.conj()), Omega, delta, "In", 3)


def test_dressed_basis_diagonalises_drive():
    Omega, delta = 8.0, -30.0
    H = np.array([[delta / 2, Omega / 2], [Omega / 2, -delta / 2]])
    up, down = dressed_basis(Omega, delta)
    E = np.hypot(Omega, delta) / 2
    assert np.allclose(H @ up, E * up) and np.allclose(H @ down, -E * down)


@given(seed=st.integers(0, 2**32 - 1), delta=st.floats(-90, 90), k=st.sampled_from([1, 2]))
@settings(max_examples=60, deadline=None)
def test_bell_phase_is_optimal(seed, delta, k):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(50, 4)) + 1j * rng.normal(size=(50, 4))
    chi = g @ g.conj().T
    chi /= np.trace(chi).real
    F, phi = bell_fidelity(chi, 20.0, delta, "As", k)
    assert 0 <= F <= 1
    assert overlap(chi, 20.0, delta, "As", k, phi) == pytest.approx(F, abs=1e-12)
    for probe in rng.uniform(-np.pi, np.pi, 100):
        assert overlap(chi, 20.0, delta, "As", k, probe) <= F + 1e-12


# ---------------------------------------------------------------- smoothing

# classic 11-point quadratic/cubic smoothing weights
SG11 = np.array([-36, 9, 44, 69, 84, 89, 84, 69, 44, 9, -36]) / 429.0


def test_savgol_reproduces_cubics_and_constants():
    t = np.linspace(-3, 5, 80)
    y = 0.4 * t**3 - t**2 + 2 * t - 7
    assert np.allclose(savgol_array(y, 11), y, atol=1e-9)
    assert np.allclose(savgol_array(np.full(30, 2.5), 7), 2.5)


def test_savgol_white_noise_gain():
    y = np.random.default_rng(3).normal(size=20000)
    out = savgol_array(y, 11)
    interior = slice(5, -5)
    assert np.allclose(out[interior], np.convolve(y, SG11[::-1], mode="same")[interior], atol=1e-12)
    assert np.var(out[interior]) / np.var(y) == pytest.approx(SG11 @ SG11, rel=0.05)


def test_savgol_series_window_and_errors():
    assert window_samples(10.0, 300.0) == 31
    assert window_samples(12.5, 300.0) == 25
    s = TimeSeries(0.0, 10.0, np.arange(60.0))
    assert np.allclose(savgol(s).values, s.values)
    with pytest.raises(ValueError):
        savgol_array(np.ones(20), 4)
    with pytest.raises(ValueError):
        savgol_array(np.ones(20), 3)
    with pytest.raises(ValueError):
        savgol_array(np.ones(5), 7)


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries(0.0, 0.0, np.ones(3))
    with pytest.raises(ValueError):
        TimeSeries(0.0, 1.0, np.ones(1))
    with pytest.raises(ValueError):
        TimeSeries.from_samples([0, 1, 3], [1, 2, 3])
    s = TimeSeries.from_samples([2.0, 4.0, 6.0], [1, 2, 3], tag="x")
    assert s.dt == 2.0 and s.meta["tag"] == "x" and np.allclose(s.times, [2, 4, 6])
