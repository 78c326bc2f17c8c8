"""Command-line front end: ``magnon-sense <command> [options]``.

Every command writes its CSV plus a ``.manifest`` file next to it; rerunning
with ``--check`` recomputes the outputs and compares their hashes with the
stored manifest.  Exit codes: 0 success, 1 check mismatch, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import sequences
from .analysis import allan_deviation, bell_fidelity, fit_dnp, fit_sho, neff_curve, savgol
from .analysis.bell import injected_level
from .analysis.fitting import FitError
from .analysis.series import TimeSeries
from .analysis.sho import sho_analytic, sho_oracle
from .analysis.smoothing import savgol_array, window_samples
from .config import ConfigError, RunManifest, config_hash, load_config, load_flat, manifest_path
from .master_equation import NumericalInstabilityError, calibrate_gamma_e
from .operators import SystemConfig

log = logging.getLogger("magnon_sense")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "MAGNON_SENSE_THREADS"


def fmt(x) -> str:
    """Full-precision decimal (17 significant digits)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def thread_count(requested: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    elif requested is not None:
        n = requested
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _config(args) -> tuple[SystemConfig, int]:
    cfg = load_config(args.config) if args.config else load_config_empty()
    seed = int(load_flat(args.config)["seed"]) if args.config else 0
    if cfg.Gamma_e is None:
        g = calibrate_gamma_e(cfg)
        log.info("calibrated electron dephasing Gamma_e = %.6g MHz against T2 = %g ns", g, cfg.T2)
        cfg = cfg.with_(Gamma_e=g)
    return cfg, seed


def load_config_empty() -> SystemConfig:
    from .config import default_config

    return default_config()


# ---------------------------------------------------------------- commands


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_spectrum(args) -> list[Path]:
    cfg, _ = _config(args)
    deltas = np.linspace(args.delta_min, args.delta_max, args.steps)
    threads = thread_count(args.threads)
    chunks = [list(c) for c in np.array_split(deltas, min(threads, len(deltas)))] if threads > 1 else [list(deltas)]

    def run(chunk):
        return sequences.spectrum_scan(cfg, args.omega, args.t_drive, chunk,
                                       progress=lambda i, r: log.info("delta = %+.3f MHz  dw_D = %+.5f MHz", r.delta, r.dw_D))

    results = [r for part in _pmap(run, chunks, threads) for r in part]
    rows = [(r.delta, r.S_drive, r.dw_ref, r.dw_sense, r.dw_D) for r in results]
    write_csv(args.out, ["delta_MHz", "S", "dw_ref_MHz", "dw_sense_MHz", "dw_D_MHz"], rows)
    return [Path(args.out)]


def resonant_mode(cfg: SystemConfig, Omega: float, delta: float) -> tuple[str, int]:
    """Species and order whose Hartmann-Hahn condition is closest to (Omega, delta)."""
    dressed = np.hypot(Omega, delta)
    options = [(abs(dressed - k * sp.omega_n), sp.name, k) for sp in cfg.species for k in (1, 2)]
    _, name, k = min(options)
    return name, k


def _feed(path):
    data = read_csv(path)
    keys = list(data)
    t, y = data[keys[0]], data[keys[1]]
    return lambda T: float(np.interp(T, t, y))


def cmd_rabi(args) -> list[Path]:
    cfg, _ = _config(args)
    species, k = resonant_mode(cfg, args.omega, args.delta)
    species = args.species or species
    k = args.k or k
    times = np.linspace(0.0, args.t_max, args.steps)
    feed = _feed(args.dnp_feed) if args.dnp_feed else None
    results = sequences.time_scan(
        cfg, args.omega, args.delta, times, dnp_feed=feed,
        progress=lambda i, r: log.info("T = %.1f ns  dw_D = %+.5f MHz", r.T, r.dw_D),
    )
    dw_D = np.array([r.dw_D for r in results])
    smoothed = _smooth(times, dw_D)
    A = getattr(cfg, species).A
    polarity = np.sign(injected_level(args.delta, k))
    rows = []
    for r, s in zip(results, smoothed):
        F, phi = bell_fidelity(r.chi_drive, args.omega, args.delta, species, k)
        rows.append((r.T, r.dw_ref, r.dw_sense, r.dw_D, s, polarity * r.dw_D / (2 * k * A), F, phi))
    header = ["T_ns", "dw_ref", "dw_sense", "dw_D", "dw_D_smoothed", "rho_k", "fidelity", "phi"]
    write_csv(args.out, header, rows)
    return [Path(args.out)]


def _smooth(times, values) -> np.ndarray:
    if len(times) < 2:
        return np.asarray(values, dtype=float)
    dt = times[1] - times[0]
    window = window_samples(dt, 300.0)
    if window > len(values):
        window = len(values) if len(values) % 2 else len(values) - 1
    if window <= 3:
        log.warning("too few samples for a 300 ns Savitzky-Golay window; leaving dw_D unsmoothed")
        return np.asarray(values, dtype=float)
    return savgol_array(values, window, 3)


def cmd_allan(args) -> list[Path]:
    data = read_csv(args.inp)
    column = args.column or next(iter(data))
    if column not in data:
        raise ConfigError(f"column {column!r} not in {args.inp}")
    f = data[column]
    n_list = [int(n) for n in args.n_list.split(",")] if args.n_list else _default_n(len(f))
    rows = [
        (n * args.tau0, s, s * args.omega_e * 1e3)
        for n, s in allan_deviation(f, n_list)
    ]
    write_csv(args.out, ["n_s", "sigma_a", "sigma_a_times_omega_e_kHz"], rows)
    return [Path(args.out)]


def _default_n(m: int) -> list[int]:
    top = max((m - 1) // 2, 1)
    return sorted({int(round(v)) for v in np.logspace(0, np.log10(top), 20)})


def cmd_neff(args) -> list[Path]:
    drives = np.linspace(args.drive_min, args.drive_max, args.steps)
    curve = neff_curve(args.n_tot, args.delta_width, drives)
    rows = []
    for op, (x, ratio, exc) in zip(drives, curve):
        rows.append((x, ratio, exc, op, ratio * args.n_tot, exc * args.delta_width))
    header = ["x", "N_eff_over_N_tot", "Omega_exc_over_Delta", "Omega_prime_MHz", "N_eff", "Omega_exc_MHz"]
    write_csv(args.out, header, rows)
    return [Path(args.out)]


def cmd_oracle(args) -> list[Path]:
    t = np.linspace(0.0, args.t_max, args.steps)
    series = sho_oracle(args.n, args.omega_prime, args.delta_width, t, rng_seed=args.seed)
    analytic = sho_analytic(args.n, args.omega_prime, args.delta_width, t)
    rows = [(ti, o, a, abs(o - a)) for ti, o, a in zip(t, series.values, analytic)]
    write_csv(args.out, ["t_ns", "p_ground_oracle", "p_ground_analytic", "abs_diff"], rows)
    return [Path(args.out)]


def cmd_fit(args) -> int:
    data = read_csv(args.inp)
    if args.model == "sho":
        keys = list(data)
        t = data[args.time_column] if args.time_column else data[keys[0]]
        y = data[args.column] if args.column else data[keys[1]]
        fit = fit_sho(TimeSeries.from_samples(t, y))
        p, e = fit.params, fit.stderr
        print(f"omega0    = {p.omega0:.6g} +- {e[0]:.2g} MHz")
        print(f"Gamma     = {p.Gamma:.6g} +- {e[1]:.2g} MHz")
        print(f"Omega_exc = {p.Omega_exc:.6g} +- {e[2]:.2g} MHz")
        print(f"residual norm = {fit.fit.residual_norm:.6g}")
        if fit.degenerate:
            print("warning: exchange frequency not distinguishable from zero")
        return EXIT_OK if fit.fit.converged else EXIT_NUMERIC
    for col in ("r", "ref", "sense"):
        if col not in data:
            raise ConfigError(f"dnp fit needs columns r, ref, sense; missing {col!r}")
    ref = np.column_stack([data["r"], data["ref"]])
    sense = np.column_stack([data["r"], data["sense"]])
    fit = fit_dnp(ref, sense)
    p, e = fit.params, fit.stderr
    print(f"a = {p.a:.6g} +- {e[0]:.2g} MHz")
    print(f"b = {p.b:.6g} +- {e[1]:.2g}")
    print(f"c = {p.c:.6g} +- {e[2]:.2g} MHz")
    if fit.fit is not None:
        print(f"residual norm = {fit.fit.residual_norm:.6g}")
        return EXIT_OK if fit.fit.converged else EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- plumbing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magnon-sense", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help=f"scan parallelism (env {THREADS_ENV} wins)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="key = value config file (defaults if omitted)")
        p.add_argument("--out", required=True, help="output CSV")
        p.add_argument("--check", action="store_true", help="verify outputs against the existing manifest")

    p = sub.add_parser("spectrum", help="differential shift versus drive detuning")
    common(p)
    p.add_argument("--omega", type=float, default=8.0)
    p.add_argument("--t-drive", type=float, default=1800.0)
    p.add_argument("--delta-min", type=float, default=-100.0)
    p.add_argument("--delta-max", type=float, default=100.0)
    p.add_argument("--steps", type=int, default=41)

    p = sub.add_parser("rabi", help="differential shift versus drive time")
    common(p)
    p.add_argument("--omega", type=float, default=34.0)
    p.add_argument("--delta", type=float, default=24.0)
    p.add_argument("--t-max", type=float, default=1500.0)
    p.add_argument("--steps", type=int, default=61)
    p.add_argument("--dnp-feed", help="CSV (T_ns, reference shift MHz) fed in as a detuning")
    p.add_argument("--species", choices=["As", "In"])
    p.add_argument("--k", type=int, choices=[1, 2])

    p = sub.add_parser("allan", help="overlapping Allan deviation of a frequency record")
    common(p, config=False)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--column")
    p.add_argument("--omega-e", type=float, default=28e3, help="qubit frequency in MHz")
    p.add_argument("--n-list", help="comma-separated averaging factors")
    p.add_argument("--tau0", type=float, default=1.0, help="sampling interval in s")

    p = sub.add_parser("neff", help="self-consistent effective mode size")
    common(p, config=False)
    p.add_argument("--n-tot", type=float, required=True)
    p.add_argument("--delta-width", type=float, required=True)
    p.add_argument("--drive-min", type=float, required=True)
    p.add_argument("--drive-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=200)

    p = sub.add_parser("oracle", help="brute-force amplitude equations against the analytic solution")
    common(p, config=False)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--omega-prime", type=float, required=True)
    p.add_argument("--delta-width", type=float, required=True)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="fit the oscillator or DNP model to a CSV")
    p.add_argument("--model", choices=["sho", "dnp"], required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--column")
    p.add_argument("--time-column")
    return parser


COMMANDS = {
    "spectrum": cmd_spectrum,
    "rabi": cmd_rabi,
    "allan": cmd_allan,
    "neff": cmd_neff,
    "oracle": cmd_oracle,
}


def _run_with_manifest(args, cfg_hash: str, seed: int) -> int:
    out = Path(args.out)
    mpath = manifest_path(out)
    previous = RunManifest.read(mpath) if args.check and mpath.exists() else None
    if args.check and previous is None:
        raise ConfigError(f"--check needs an existing manifest at {mpath}")
    manifest = RunManifest(args.command, cfg_hash, seed)
    outputs = COMMANDS[args.command](args)
    manifest.finish(*outputs)
    if previous is not None:
        bad = [p for p, h in manifest.outputs.items() if previous.outputs.get(p) != h]
        if bad or previous.config_hash != manifest.config_hash:
            for p in bad:
                print(f"hash mismatch: {p}", file=sys.stderr)
            if previous.config_hash != manifest.config_hash:
                print("config hash differs from the manifest", file=sys.stderr)
            return EXIT_MISMATCH
        print(f"check passed: {', '.join(manifest.outputs)}")
    manifest.write(mpath)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "fit":
            return cmd_fit(args)
        thread_count(args.threads)
        if getattr(args, "config", None) is not None or args.command in ("spectrum", "rabi"):
            cfg = load_config(args.config) if args.config else load_config_empty()
            cfg_h = config_hash(cfg)
            seed = int(load_flat(args.config)["seed"]) if args.config else 0
        else:
            cfg_h = config_hash_args(args)
            seed = getattr(args, "seed", 0)
        return _run_with_manifest(args, cfg_h, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalInstabilityError, FitError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def config_hash_args(args) -> str:
    """Hash of the command-line parameters for commands without a config file."""
    skip = {"out", "check", "threads", "verbose"}
    canon = {k: v for k, v in vars(args).items() if k not in skip}
    return hashlib.sha256(json.dumps(canon, sort_keys=True, default=str).encode()).hexdigest()


if __name__ == "__main__":
    sys.exit(main())
