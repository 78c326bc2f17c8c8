"""Flat ``key = value`` configuration files and run manifests."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .operators import SpeciesParams, SystemConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line


# Measured and spectrum-fit parameters (nuclear counts are totals; the mode
# size is participation * total unless N_As / N_In is given directly).
DEFAULTS: dict[str, float | int | str] = {
    "omega_n_As": 32.5,
    "omega_n_In": 42.0,
    "A_As": 0.95,
    "A_In": 0.55,
    "B_Q_As": 1.0,
    "B_Q_In": 1.0,
    "theta_As": 25.0,
    "theta_In": 25.0,
    "Gamma_n_As": 0.5,
    "Gamma_n_In": 0.6,
    "N_tot_As": 40000,
    "N_tot_In": 20000,
    "participation_As": 0.05,
    "participation_In": 0.029,
    "T2_star": 32.0,
    "T2": 2000.0,
    "Q": 45.0,
    "Gamma_p": 35.0,
    "omega_e": 28e3,
    "ensemble_samples": 21,
    "dt": 0.25,
    "delta_free": 0.0,
    "reinit": "project",
    "pump_time": 150.0,
    "seed": 0,
}
# keys with no default value (None means "derive")
OPTIONAL = {"N_As": None, "N_In": None, "Gamma_e": None, "ramsey_tau": None}
# shorthand keys that set both species at once
SHARED = {"B_Q": ("B_Q_As", "B_Q_In"), "theta": ("theta_As", "theta_In")}
INT_KEYS = {"ensemble_samples", "seed"}
STR_KEYS = {"reinit"}

# Magnon-dynamics scenario used for the coherent-oscillation simulations.
DYNAMICS: dict[str, float] = {
    "A_As": 1.35,
    "A_In": 0.4,
    "N_As": 342,
    "N_In": 364,
    "Gamma_n_As": 0.05,
    "Gamma_n_In": 0.06,
}

SPINS = {"As": 1.5, "In": 4.5}


def _coerce(key: str, raw: str, line: int | None, path: str | None):
    if key in STR_KEYS:
        return raw
    try:
        if key in INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        kind = "integer" if key in INT_KEYS else "number"
        raise ConfigError(f"value for {key!r} is not a {kind}: {raw!r}", line, path) from None


def parse_text(text: str, path: str | None = None) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    lines: dict[str, int] = {}
    known = set(DEFAULTS) | set(OPTIONAL) | set(SHARED)
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", no, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {line!r}", no, path)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", no, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", no, path)
        values[key] = _coerce(key, value, no, path)
        lines[key] = no
    values["_lines"] = lines
    return values


def resolve(values: dict, path: str | None = None) -> dict:
    """Fill defaults and expand shorthand keys into a complete flat mapping."""
    lines = values.get("_lines", {})
    out = dict(DEFAULTS)
    out.update(OPTIONAL)
    for key, targets in SHARED.items():
        if key in values:
            for t in targets:
                out[t] = values[key]
    for key, v in values.items():
        if key.startswith("_") or key in SHARED:
            continue
        out[key] = v
    for sp in SPINS:
        if out[f"N_{sp}"] is None:
            out[f"N_{sp}"] = out[f"participation_{sp}"] * out[f"N_tot_{sp}"]
        elif f"participation_{sp}" in values:
            raise ConfigError(
                f"give either N_{sp} or participation_{sp}, not both",
                lines.get(f"N_{sp}"),
                path,
            )
    out["_lines"] = lines
    return out


def build_config(flat: dict, path: str | None = None) -> SystemConfig:
    lines = flat.get("_lines", {})

    def species(name: str) -> SpeciesParams:
        try:
            return SpeciesParams(
                name=name,
                spin=SPINS[name],
                omega_n=flat[f"omega_n_{name}"],
                A=flat[f"A_{name}"],
                B_Q=flat[f"B_Q_{name}"],
                theta=flat[f"theta_{name}"],
                N=flat[f"N_{name}"],
                Gamma_n=flat[f"Gamma_n_{name}"],
            )
        except ValueError as exc:
            bad = [k for k in lines if k.endswith(f"_{name}")]
            raise ConfigError(str(exc), lines[bad[0]] if bad else None, path) from None

    As, In = species("As"), species("In")
    kwargs = {
        f.name: flat[f.name]
        for f in dataclasses.fields(SystemConfig)
        if f.name not in ("As", "In") and f.name in flat
    }
    try:
        return SystemConfig(As=As, In=In, **kwargs)
    except ValueError as exc:
        msg = str(exc)
        # longest match first so "T2_star" wins over "T2"
        culprit = max((k for k in lines if k in msg), key=len, default=None)
        if culprit is None and "T2_star" in msg:
            culprit = "T2_star" if "T2_star" in lines else "T2"
        raise ConfigError(msg, lines.get(culprit), path) from None


def load_config(path) -> SystemConfig:
    """Read a config file; unspecified keys take the measured/spectrum defaults."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(p)) from None
    return build_config(resolve(parse_text(text, str(p)), str(p)), str(p))


def load_flat(path) -> dict:
    """Resolved flat mapping (useful for the seed and for hashing)."""
    text = Path(path).read_text() if path is not None else ""
    return resolve(parse_text(text, str(path) if path else None), str(path) if path else None)


def default_config(**overrides) -> SystemConfig:
    flat = resolve(dict(overrides))
    return build_config(flat)


def dynamics_config(**overrides) -> SystemConfig:
    """Parameters of the coherent magnon-oscillation simulations."""
    values = dict(DYNAMICS)
    values.update(overrides)
    return build_config(resolve(values))


def config_hash(cfg: SystemConfig) -> str:
    """SHA-256 of the canonical (sorted-key) form of a resolved config."""
    canon = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished: str = ""
    outputs: dict[str, str] = field(default_factory=dict)  # path -> sha256

    def finish(self, *paths) -> None:
        for p in paths:
            self.outputs[str(p)] = file_sha256(p)
        self.finished = datetime.now(timezone.utc).isoformat()

    def dumps(self) -> str:
        lines = [
            f"command = {self.command}",
            f"config_hash = {self.config_hash}",
            f"seed = {self.seed}",
            f"started = {self.started}",
            f"finished = {self.finished}",
        ]
        lines += [f"output = {p} {h}" for p, h in sorted(self.outputs.items())]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "RunManifest":
        fields: dict = {"outputs": {}}
        for raw in Path(path).read_text().splitlines():
            if "=" not in raw:
                continue
            key, value = (s.strip() for s in raw.split("=", 1))
            if key == "output":
                p, h = value.rsplit(" ", 1)
                fields["outputs"][p] = h
            elif key == "seed":
                fields["seed"] = int(value)
            else:
                fields[key] = value
        return cls(**fields)


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".manifest")
