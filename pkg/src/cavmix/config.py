"""Strict key-value experiment configuration format.

A configuration is UTF-8 text of ``key = value`` lines. Global keys come
first, followed by a ``[cavity]`` block and one ``[species]`` block per
species (the first species defines the unit system, mass 1/2). Blank
lines and whole-line ``#`` comments are ignored. Unknown keys are hard
errors: a silent typo in a physics parameter would invalidate an
experiment.

Global keys
    kind            simulate | ensemble | threshold | equilibrium |
                    heatflow | sweep
    duration        total integration time (simulate/ensemble)
    dt              integration step (optional; conservative default)
    stride          recording stride in steps (default 1)
    noise           on | off (default on)
    perturbation    seeded density modulation amplitude in [0, 1)
    seed            base RNG seed (optional; drawn and recorded if absent)
    realisations    ensemble size (default 1)
    bins            histogram bin count (default 64)
    out             default output directory (optional)
    format          csv (the only supported value)
    sweep_parameter / sweep_start / sweep_stop / sweep_count
                    sweep axis: a numeric parameter path such as
                    ``cavity.kappa`` or ``species[0].pump``

``[cavity]`` keys: kappa, detuning.
``[species]`` keys: count, mass, pump, lightshift (default 0),
temperature.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    CavityParams,
    ConfigError,
    SimConfig,
    SpeciesParams,
    default_timestep,
)

KINDS = ("simulate", "ensemble", "threshold", "equilibrium", "heatflow", "sweep")

_GLOBAL_KEYS = {
    "kind", "duration", "dt", "stride", "noise", "perturbation", "seed",
    "realisations", "bins", "out", "format",
    "sweep_parameter", "sweep_start", "sweep_stop", "sweep_count",
}
_CAVITY_KEYS = {"kappa", "detuning"}
_SPECIES_KEYS = {"count", "mass", "pump", "lightshift", "temperature"}


class ConfigParseError(ConfigError):
    """Parse or validation failure with line-tagged diagnostics."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    sim: SimConfig
    realisations: int = 1
    bins: int = 64
    out: str | None = None
    fmt: str = "csv"
    sweep: SweepSpec | None = None
    dt_explicit: bool = field(default=True, compare=False)

    def to_text(self) -> str:
        """Resolved configuration; reparsing it reproduces this object."""
        lines = [f"kind = {self.kind}"]
        lines.append(f"duration = {self.sim.total_time!r}")
        lines.append(f"dt = {self.sim.dt!r}")
        lines.append(f"stride = {self.sim.record_stride}")
        lines.append(f"noise = {'on' if self.sim.noise else 'off'}")
        lines.append(f"perturbation = {self.sim.perturbation!r}")
        if self.sim.seed is not None:
            lines.append(f"seed = {self.sim.seed}")
        lines.append(f"realisations = {self.realisations}")
        lines.append(f"bins = {self.bins}")
        if self.out is not None:
            lines.append(f"out = {self.out}")
        lines.append(f"format = {self.fmt}")
        if self.sweep is not None:
            lines.append(f"sweep_parameter = {self.sweep.parameter}")
            lines.append(f"sweep_start = {self.sweep.start!r}")
            lines.append(f"sweep_stop = {self.sweep.stop!r}")
            lines.append(f"sweep_count = {self.sweep.count}")
        lines.append("")
        lines.append("[cavity]")
        lines.append(f"kappa = {self.sim.cavity.kappa!r}")
        lines.append(f"detuning = {self.sim.cavity.detuning!r}")
        for s in self.sim.species:
            lines.append("")
            lines.append("[species]")
            lines.append(f"count = {s.n_particles}")
            lines.append(f"mass = {s.mass!r}")
            lines.append(f"pump = {s.pump_coupling!r}")
            lines.append(f"lightshift = {s.light_shift!r}")
            lines.append(f"temperature = {s.init_temperature!r}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, seed: int | None = None,
                       realisations: int | None = None,
                       out: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, sim=cfg.sim.with_seed(seed))
        if realisations is not None:
            cfg = replace(cfg, realisations=realisations)
        if out is not None:
            cfg = replace(cfg, out=out)
        return cfg


def _parse_sections(text: str):
    """Split into (global, cavity, species...) dicts of key -> (line, raw)."""
    problems: list[str] = []
    glob: dict = {}
    cavity: dict | None = None
    species: list[dict] = []
    current = glob
    allowed = _GLOBAL_KEYS
    section_name = "global"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            name = m.group(1)
            if name == "cavity":
                if cavity is not None:
                    problems.append(f"line {lineno}: duplicate [cavity] block")
                cavity = {}
                current, allowed, section_name = cavity, _CAVITY_KEYS, "cavity"
            elif name == "species":
                species.append({})
                current, allowed, section_name = species[-1], _SPECIES_KEYS, "species"
            else:
                problems.append(f"line {lineno}: unknown section [{name}]")
                current, allowed, section_name = {}, set(), name
            continue
        m = re.fullmatch(r"([\w.\[\]]+)\s*=\s*(\S.*?)\s*", line)
        if not m:
            problems.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = m.group(1), m.group(2)
        if key not in allowed:
            problems.append(
                f"line {lineno}: unknown key {key!r} in [{section_name}] section"
            )
            continue
        if key in current:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        current[key] = (lineno, value)
    return glob, cavity, species, problems


def _get(section: dict, key: str, conv, problems: list[str], default=None,
         required: bool = False, section_name: str = "global"):
    if key not in section:
        if required:
            problems.append(f"missing required key {key!r} in [{section_name}]")
        return default
    lineno, raw = section[key]
    try:
        return conv(raw)
    except (TypeError, ValueError):
        problems.append(f"line {lineno}: invalid value {raw!r} for key {key!r}")
        return default


def _to_bool(raw: str) -> bool:
    if raw in ("on", "true", "yes", "1"):
        return True
    if raw in ("off", "false", "no", "0"):
        return False
    raise ValueError(raw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration; all violations are reported."""
    glob, cavity_sec, species_secs, problems = _parse_sections(text)

    kind = _get(glob, "kind", str, problems, required=True)
    if kind is not None and kind not in KINDS:
        problems.append(f"kind must be one of {'|'.join(KINDS)}, got {kind!r}")

    duration = _get(glob, "duration", float, problems, default=0.0)
    dt = _get(glob, "dt", float, problems)
    stride = _get(glob, "stride", int, problems, default=1)
    noise = _get(glob, "noise", _to_bool, problems, default=True)
    perturbation = _get(glob, "perturbation", float, problems, default=0.0)
    seed = _get(glob, "seed", int, problems)
    realisations = _get(glob, "realisations", int, problems, default=1)
    bins = _get(glob, "bins", int, problems, default=64)
    out = _get(glob, "out", str, problems)
    fmt = _get(glob, "format", str, problems, default="csv")
    if fmt != "csv":
        problems.append(f"format must be 'csv', got {fmt!r}")

    if duration is not None and duration < 0:
        problems.append(f"duration must be >= 0, got {duration}")
    if dt is not None and not dt > 0:
        problems.append(f"dt must be > 0, got {dt}")
    if stride is not None and stride < 1:
        problems.append(f"stride must be >= 1, got {stride}")
    if perturbation is not None and not 0.0 <= perturbation < 1.0:
        problems.append(
            f"perturbation must lie in [0, 1), got {perturbation}")
    if realisations is not None and realisations < 1:
        problems.append(f"realisations must be >= 1, got {realisations}")
    if bins is not None and bins < 2:
        problems.append(f"bins must be >= 2, got {bins}")

    sweep = None
    sweep_keys = [k for k in ("sweep_parameter", "sweep_start", "sweep_stop",
                              "sweep_count") if k in glob]
    if kind == "sweep" or sweep_keys:
        parameter = _get(glob, "sweep_parameter", str, problems, required=True)
        start = _get(glob, "sweep_start", float, problems, required=True)
        stop = _get(glob, "sweep_stop", float, problems, required=True)
        count = _get(glob, "sweep_count", int, problems, required=True)
        if count is not None and count < 2:
            problems.append(f"sweep_count must be >= 2, got {count}")
        if None not in (parameter, start, stop, count):
            sweep = SweepSpec(parameter=parameter, start=start, stop=stop,
                              count=max(count, 2))

    if cavity_sec is None:
        problems.append("missing [cavity] section")
        cavity = None
    else:
        kappa = _get(cavity_sec, "kappa", float, problems, required=True,
                     section_name="cavity")
        detuning = _get(cavity_sec, "detuning", float, problems, required=True,
                        section_name="cavity")
        cavity = None
        if None not in (kappa, detuning):
            try:
                cavity = CavityParams(kappa=kappa, detuning=detuning)
            except ConfigError as exc:
                problems.append(f"[cavity]: {exc}")

    species: list[SpeciesParams] = []
    if not species_secs:
        problems.append("at least one [species] section is required")
    for i, sec in enumerate(species_secs, start=1):
        count = _get(sec, "count", int, problems, required=True,
                     section_name="species")
        mass = _get(sec, "mass", float, problems, required=True,
                    section_name="species")
        pump = _get(sec, "pump", float, problems, required=True,
                    section_name="species")
        lightshift = _get(sec, "lightshift", float, problems, default=0.0)
        temperature = _get(sec, "temperature", float, problems, required=True,
                           section_name="species")
        if None in (count, mass, pump, temperature):
            continue
        try:
            species.append(SpeciesParams(
                n_particles=count, mass=mass, pump_coupling=pump,
                light_shift=lightshift, init_temperature=temperature,
            ))
        except ConfigError as exc:
            problems.append(f"[species] #{i}: {exc}")

    if problems or cavity is None or len(species) != len(species_secs):
        raise ConfigParseError(problems)

    dt_explicit = dt is not None
    if dt is None:
        dt = default_timestep(tuple(species), cavity)
    try:
        sim = SimConfig(
            species=tuple(species), cavity=cavity, dt=dt, total_time=duration,
            record_stride=stride, noise=noise, seed=seed,
            perturbation=perturbation,
        )
    except ConfigError as exc:
        raise ConfigParseError([str(exc)]) from exc

    if kind == "heatflow" and len(species) < 2:
        raise ConfigParseError(["heatflow requires at least two species"])

    return ExperimentConfig(kind=kind, sim=sim, realisations=realisations,
                            bins=bins, out=out, fmt=fmt, sweep=sweep,
                            dt_explicit=dt_explicit)


# ----------------------------------------------------------------------
# sweep parameter paths

_PATH_RE = re.compile(r"^(dt|duration|cavity\.(kappa|detuning)|"
                      r"species\[(\d+)\]\.(pump|lightshift|temperature|mass))$")


def resolve_path(cfg: ExperimentConfig, path: str):
    """Getter/setter pair for a numeric parameter path."""
    m = _PATH_RE.match(path)
    if not m:
        raise ConfigError(f"sweep parameter path {path!r} does not resolve to "
                          "a numeric field")

    def get(c: ExperimentConfig) -> float:
        sim = c.sim
        if path == "dt":
            return sim.dt
        if path == "duration":
            return sim.total_time
        if path.startswith("cavity."):
            return getattr(sim.cavity, path.split(".")[1])
        idx = int(m.group(3))
        attr = {"pump": "pump_coupling", "lightshift": "light_shift",
                "temperature": "init_temperature", "mass": "mass"}[m.group(4)]
        return getattr(sim.species[idx], attr)

    def set_(c: ExperimentConfig, value: float) -> ExperimentConfig:
        sim = c.sim
        if path == "dt":
            sim = replace(sim, dt=value)
        elif path == "duration":
            sim = replace(sim, total_time=value)
        elif path.startswith("cavity."):
            sim = replace(sim, cavity=replace(sim.cavity,
                                              **{path.split(".")[1]: value}))
        else:
            idx = int(m.group(3))
            attr = {"pump": "pump_coupling", "lightshift": "light_shift",
                    "temperature": "init_temperature", "mass": "mass"}[m.group(4)]
            new_species = list(sim.species)
            new_species[idx] = replace(new_species[idx], **{attr: value})
            sim = replace(sim, species=tuple(new_species))
        return replace(c, sim=sim)

    # verify the index exists now rather than mid-sweep
    get(cfg)
    return get, set_
