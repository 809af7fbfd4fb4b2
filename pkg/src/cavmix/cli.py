"""Experiment runner: config ingestion, orchestration, plain-text artifacts.

Every run directory receives ``resolved.cfg`` (the fully resolved
configuration, which reparses to the executed one), ``summary.txt``
(key-value run metadata, seeds, analytic predictions, final observables)
and, per experiment kind, CSV tables. CSV headers carry the resolved
config as ``#`` comments and numeric cells use shortest round-trip
decimal representation, so rerunning with the same config and seed gives
byte-identical CSV bodies. Analytic predictions are co-emitted alongside
simulated columns so each file is self-contained for comparison plots.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import secrets
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, kinetics, observables
from .config import KINDS, ConfigParseError, ExperimentConfig, parse_config, resolve_path
from .dynamics import IntegrationDiverged, Recorder, realisation_seed
from .model import ConfigError

PRESETS = ("fig2", "fig3", "fig4", "fig5a", "fig5b")


class NumericalFailure(RuntimeError):
    """Integration divergence or solver non-convergence (exit code 3)."""


# ----------------------------------------------------------------------
# formatting


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, complex):
        return f"{_fmt(value.real)}{value.imag:+}j"
    return repr(float(value))


def _config_comments(cfg: ExperimentConfig) -> list[str]:
    return [f"# {line}" for line in cfg.to_text().rstrip("\n").split("\n")]


def write_csv(path: Path, names: list[str], columns: list[np.ndarray],
              cfg: ExperimentConfig) -> None:
    """Comma-separated table with the resolved config as header comments."""
    n_rows = len(columns[0])
    for name, col in zip(names, columns):
        if len(col) != n_rows:
            raise ValueError(f"column {name!r} has {len(col)} rows, "
                             f"expected {n_rows}")
    lines = _config_comments(cfg)
    lines.append(",".join(names))
    for i in range(n_rows):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n")


def write_summary(path: Path, entries: list[tuple[str, object]]) -> None:
    path.write_text(
        "".join(f"{key} = {_fmt(value)}\n" for key, value in entries)
    )


# ----------------------------------------------------------------------
# analytic report


def analytic_entries(cfg: ExperimentConfig):
    """Summary entries plus the equilibrium predictions used for columns.

    Returns ``(entries, report, prediction)`` where ``prediction`` is the
    organised prediction above threshold, the homogeneous one below, or
    None outside the negative-detuning regime.
    """
    species = cfg.sim.species
    cavity = cfg.sim.cavity
    delta = kinetics.effective_detuning(cavity, species)
    entries: list[tuple[str, object]] = [("delta_eff", delta)]

    if delta >= 0:
        entries.append(("in_regime", False))
        return entries, None, None

    report = kinetics.stability_margin(cavity, species)
    entries += [
        ("in_regime", report.in_regime),
        ("margin", report.threshold_lhs),
        ("unstable", report.unstable),
        ("critical_pump_scale", kinetics.critical_pump_scale(cavity, species)),
        ("temp_star", kinetics.temp_star(cavity.kappa, delta)),
    ]
    for i, share in enumerate(report.species_shares, start=1):
        entries.append((f"threshold_share_{i}", share))
    try:
        hot = kinetics.growth_rate_hot(cavity, species)
    except kinetics.OutOfRegimeError:
        hot = None
    entries.append(("growth_rate_hot", np.nan if hot is None else hot))
    entries.append(("growth_rate",
                    np.nan if report.growth_rate is None else report.growth_rate))

    total_pump = sum(s.n_particles * s.pump_coupling for s in species)
    entries.append(("photon_max",
                    total_pump**2 / (cavity.kappa**2 + delta**2)))

    hom = kinetics.qgaussian_equilibrium(cavity, species)
    for i, s in enumerate(species, start=1):
        entries.append((f"q_{i}", hom.q[i - 1]))
        entries.append((f"temp_hom_{i}", hom.kinetic_temperatures[i - 1]))

    if not report.unstable:
        return entries, report, hom

    org = kinetics.organised_equilibrium(cavity, species)
    if not org.converged:
        raise NumericalFailure("organised equilibrium fixed point did not "
                               f"converge (residual {org.residual:g})")
    entries += [
        ("alpha0_re", org.alpha0.real),
        ("alpha0_im", org.alpha0.imag),
        ("photon_org", abs(org.alpha0) ** 2),
    ]
    for i in range(len(species)):
        entries.append((f"temp_org_{i + 1}", org.kinetic_temperatures[i]))
        entries.append((f"trap_freq_{i + 1}", org.trap_frequencies[i]))
        entries.append((f"theta_org_{i + 1}", org.order_parameters[i]))
        entries.append((f"uncertainty_{i + 1}", org.uncertainty_products[i]))
    return entries, report, org


def _histogram_columns(cfg: ExperimentConfig, momenta: np.ndarray,
                       species_index: int, prediction, adiabatic):
    """(names, columns) of one species' momentum histogram table."""
    s = cfg.sim.species[species_index]
    hist = observables.histogram(momenta, bins=cfg.bins)
    centers = hist.centers
    dens = hist.density()
    initial = kinetics.maxwellian_density(s.init_temperature, s.mass)(centers)

    if prediction is None:
        pred = np.full_like(centers, np.nan)
    elif prediction.branch == "organised":
        pred = kinetics.maxwellian_density(
            prediction.kinetic_temperatures[species_index], s.mass)(centers)
    elif prediction.exists[species_index] and np.isfinite(
            prediction.kinetic_temperatures[species_index]):
        pred = observables.qgaussian_density(
            centers, prediction.q[species_index], prediction.temp_star, s.mass)
    else:
        pred = np.full_like(centers, np.nan)

    names = ["p", "density", "pred_density", "initial_density"]
    cols = [centers, dens, pred, initial]
    if adiabatic is not None:
        marg = adiabatic.predictions[species_index].momentum_marginal(centers)
        names.append("pred_adiabatic_density")
        cols.append(np.asarray(marg))
    return names, cols


def _series_prediction_columns(cfg: ExperimentConfig, n_rows: int,
                               entries: list[tuple[str, object]]):
    """Constant prediction columns appended to time-series tables."""
    lookup = dict(entries)
    names: list[str] = []
    cols: list[np.ndarray] = []

    def const(name: str, key: str) -> None:
        value = lookup.get(key, np.nan)
        value = np.nan if value is None else float(value)
        names.append(name)
        cols.append(np.full(n_rows, value))

    const("pred_photon_max", "photon_max")
    const("pred_photon", "photon_org")
    for i in range(1, len(cfg.sim.species) + 1):
        key = f"temp_org_{i}" if f"temp_org_{i}" in lookup else f"temp_hom_{i}"
        const(f"pred_temp_{i}", key)
        const(f"pred_theta_{i}", f"theta_org_{i}")
    return names, cols


# ----------------------------------------------------------------------
# experiment kinds


def _run_simulate(cfg: ExperimentConfig, out: Path, threads: int,
                  entries, prediction, adiabatic) -> list[tuple[str, object]]:
    sim = cfg.sim
    ts = dynamics.run(sim, sim.seed, Recorder(stride=sim.record_stride))
    n_species = len(sim.species)
    names = ["t", "re_alpha", "im_alpha", "photon"]
    cols = [ts.times, ts.re_alpha, ts.im_alpha, ts.photon]
    for i in range(n_species):
        names += [f"theta_{i + 1}", f"temp_{i + 1}", f"bunch_{i + 1}"]
        cols += [ts.order_parameter[i], ts.kinetic_temperature[i],
                 ts.bunching[i]]
    pnames, pcols = _series_prediction_columns(cfg, len(ts.times), entries)
    write_csv(out / "timeseries.csv", names + pnames, cols + pcols, cfg)

    final = []
    for i in range(n_species):
        hnames, hcols = _histogram_columns(
            cfg, ts.final_state.momenta[i], i, prediction, adiabatic)
        write_csv(out / f"hist_s{i + 1}.csv", hnames, hcols, cfg)
        final += [
            (f"final_theta_{i + 1}", ts.order_parameter[i, -1]),
            (f"final_temp_{i + 1}", ts.kinetic_temperature[i, -1]),
            (f"final_bunch_{i + 1}", ts.bunching[i, -1]),
        ]
    final.append(("final_photon", ts.photon[-1]))
    final.append(("n_recorded", len(ts.times)))
    return final


def _run_ensemble(cfg: ExperimentConfig, out: Path, threads: int,
                  entries, prediction, adiabatic) -> list[tuple[str, object]]:
    sim = cfg.sim
    stats = dynamics.ensemble_run(sim, cfg.realisations, sim.seed,
                                  Recorder(stride=sim.record_stride),
                                  n_jobs=threads)
    n_species = len(sim.species)
    names = ["t"]
    cols = [stats.times]
    for ch, label in (("re_alpha", "re_alpha"), ("im_alpha", "im_alpha"),
                      ("photon", "photon")):
        names += [label, f"{label}_se"]
        cols += [stats.mean[ch], stats.stderr[ch]]
    for ch, label in (("order_parameter", "theta"),
                      ("kinetic_temperature", "temp"), ("bunching", "bunch")):
        for i in range(n_species):
            names += [f"{label}_{i + 1}", f"{label}_{i + 1}_se"]
            cols += [stats.mean[ch][i], stats.stderr[ch][i]]
    pnames, pcols = _series_prediction_columns(cfg, len(stats.times), entries)
    write_csv(out / "timeseries.csv", names + pnames, cols + pcols, cfg)

    final = []
    for i in range(n_species):
        hnames, hcols = _histogram_columns(
            cfg, stats.pooled_momenta[i], i, prediction, adiabatic)
        write_csv(out / f"hist_s{i + 1}.csv", hnames, hcols, cfg)
        pooled = stats.pooled_momenta[i]
        final.append((f"final_psq_over_m_{i + 1}",
                      float(np.mean(pooled**2)) / sim.species[i].mass))
    final.append(("realisations", stats.n_realisations))
    final.append(("n_recorded", len(stats.times)))
    return final


def _run_heatflow(cfg: ExperimentConfig, out: Path) -> list[tuple[str, object]]:
    sim = cfg.sim
    s1, s2 = sim.species[0], sim.species[1]
    flow = kinetics.heat_flow(sim.cavity, s1, s2)
    kappa = sim.cavity.kappa
    # linear grid from -4*kappa to -0.05*kappa; contains exactly -kappa
    deltas = np.linspace(-4.0, -0.05, 80) * kappa
    scan_q21 = np.empty_like(deltas)
    scan_q12 = np.empty_like(deltas)
    u0_shift = 0.5 * sum(s.n_particles * s.light_shift for s in sim.species)
    for j, d in enumerate(deltas):
        cav = replace(sim.cavity, detuning=d + u0_shift)
        f = kinetics.heat_flow(cav, s1, s2)
        scan_q21[j] = f.q_2to1
        scan_q12[j] = f.q_1to2
    write_csv(out / "heatflow_scan.csv", ["delta", "q_2to1", "q_1to2"],
              [deltas, scan_q21, scan_q12], cfg)
    return [("q_2to1", flow.q_2to1), ("q_1to2", flow.q_1to2)]


def _run_sweep(cfg: ExperimentConfig, out: Path,
               threads: int) -> list[tuple[str, object]]:
    get, set_ = resolve_path(cfg, cfg.sweep.parameter)
    values = cfg.sweep.values()
    n_species = len(cfg.sim.species)

    def point(j: int):
        pcfg = set_(cfg, float(values[j]))
        try:
            entries, report, prediction = analytic_entries(pcfg)
        except (kinetics.OutOfRegimeError, NumericalFailure):
            entries, report, prediction = [], None, None
        lookup = dict(entries)
        row = {
            "value": float(values[j]),
            "delta": lookup.get("delta_eff", np.nan),
            "margin": lookup.get("margin", np.nan),
            "unstable": float(bool(lookup.get("unstable", False))),
            "gamma_hot": lookup.get("growth_rate_hot", np.nan),
            "gamma": lookup.get("growth_rate", np.nan),
            "temp_star": lookup.get("temp_star", np.nan),
        }
        for i in range(1, n_species + 1):
            row[f"q_{i}"] = lookup.get(f"q_{i}", np.nan)
            key = f"temp_org_{i}" if f"temp_org_{i}" in lookup else f"temp_hom_{i}"
            row[f"pred_temp_{i}"] = lookup.get(key, np.nan)
        if pcfg.sim.total_time > 0:
            ts = dynamics.run(pcfg.sim, realisation_seed(pcfg.sim.seed, j),
                              Recorder(stride=pcfg.sim.record_stride))
            row["final_photon"] = ts.photon[-1]
            for i in range(n_species):
                row[f"final_theta_{i + 1}"] = ts.order_parameter[i, -1]
                row[f"final_temp_{i + 1}"] = ts.kinetic_temperature[i, -1]
        else:
            row["final_photon"] = np.nan
            for i in range(n_species):
                row[f"final_theta_{i + 1}"] = np.nan
                row[f"final_temp_{i + 1}"] = np.nan
        return row

    if threads == 1 or cfg.sim.total_time == 0:
        rows = [point(j) for j in range(len(values))]
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=threads)(
            delayed(point)(j) for j in range(len(values))
        )

    names = list(rows[0].keys())
    cols = [np.array([row[name] for row in rows]) for name in names]
    write_csv(out / "sweep.csv", names, cols, cfg)
    return [("sweep_parameter", cfg.sweep.parameter),
            ("sweep_points", len(values))]


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None,
                   threads: int = 1) -> Path:
    """Execute one experiment and write its artifacts; returns the run dir."""
    if cfg.sim.seed is None:
        cfg = cfg.with_overrides(seed=secrets.randbits(63))
    out = Path(out_dir if out_dir is not None else
               cfg.out if cfg.out is not None else f"out_{cfg.kind}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(cfg.to_text())

    entries: list[tuple[str, object]] = [
        ("kind", cfg.kind),
        ("created", datetime.datetime.now(datetime.timezone.utc).isoformat()),
        ("seed", cfg.sim.seed),
        ("dt", cfg.sim.dt),
        ("duration", cfg.sim.total_time),
    ]
    for i, s in enumerate(cfg.sim.species, start=1):
        entries.append((f"species_{i}",
                        f"N={s.n_particles} m={_fmt(s.mass)} "
                        f"eta={_fmt(s.pump_coupling)} "
                        f"u0={_fmt(s.light_shift)} "
                        f"T={_fmt(s.init_temperature)}"))

    if cfg.kind in ("simulate", "ensemble", "threshold", "equilibrium",
                    "heatflow"):
        analytic, report, prediction = analytic_entries(cfg)
        entries += analytic
    else:
        analytic, report, prediction = [], None, None

    adiabatic = None
    if (cfg.kind in ("simulate", "ensemble") and report is not None
            and report.unstable):
        adiabatic = kinetics.adiabatic_equilibrium(cfg.sim.cavity,
                                                   cfg.sim.species)
        entries += [
            ("alpha_adiabatic_re", adiabatic.alpha0.real),
            ("alpha_adiabatic_im", adiabatic.alpha0.imag),
        ]
        for i, th in enumerate(adiabatic.order_parameters, start=1):
            entries.append((f"theta_adiabatic_{i}", th))

    try:
        if cfg.kind == "simulate":
            entries += _run_simulate(cfg, out, threads, analytic, prediction,
                                     adiabatic)
        elif cfg.kind == "ensemble":
            entries += _run_ensemble(cfg, out, threads, analytic, prediction,
                                     adiabatic)
        elif cfg.kind == "heatflow":
            entries += _run_heatflow(cfg, out)
        elif cfg.kind == "sweep":
            entries += _run_sweep(cfg, out, threads)
        # threshold and equilibrium are fully covered by analytic_entries
    except IntegrationDiverged as exc:
        raise NumericalFailure(str(exc)) from exc

    write_summary(out / "summary.txt", entries)
    return out


# ----------------------------------------------------------------------
# entry point


def preset_path(name: str) -> Path:
    """Filesystem path of a shipped preset configuration."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: "
                          f"{', '.join(PRESETS)}")
    return Path(str(resources.files("cavmix") / "presets" / f"{name}.cfg"))


def _load_config(path_arg: str) -> ExperimentConfig:
    path = Path(path_arg)
    if not path.exists() and path_arg in PRESETS:
        path = preset_path(path_arg)
    if not path.exists():
        raise ConfigError(f"config file not found: {path_arg}")
    return parse_config(path.read_text())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cavmix",
        description="Stochastic simulation and kinetic theory of "
                    "multispecies atoms coupled to a lossy cavity mode.",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True,
                        help="config file path or preset name "
                             f"({', '.join(PRESETS)})")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--realisations", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        cfg = replace(cfg, kind=args.kind)
        cfg = cfg.with_overrides(seed=args.seed,
                                 realisations=args.realisations)
        if cfg.kind == "sweep" and cfg.sweep is None:
            raise ConfigError("kind=sweep requires sweep_* keys in the config")
        if cfg.kind == "heatflow" and len(cfg.sim.species) < 2:
            raise ConfigError("heatflow requires at least two species")
        if cfg.kind == "ensemble" and cfg.sim.seed is None:
            # draw here so the recorded base seed covers every realisation
            cfg = cfg.with_overrides(seed=secrets.randbits(63))
    except ConfigParseError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        out = run_experiment(cfg, out_dir=args.out, threads=args.threads)
    except (NumericalFailure, IntegrationDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
