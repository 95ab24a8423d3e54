"""Command-line front end: subcommand dispatch, CSV/JSON artifacts, manifests.

Exit codes: 0 success, 2 usage error, 3 configuration/input error,
4 numeric failure. Every run writes a JSON manifest echoing the resolved
configuration, the seed, and tool versions; CSV bodies carry no
timestamps, so re-running a manifest reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, cavity as cavity_mod, config as config_mod, diffusionmc, fitkit, lineshape, speclab
from .config import ConfigError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

CSV_SCHEMAS = """\
CSV schemas (all numbers use shortest round-trip decimal notation)

bath-angle    -> bath_angle.csv:      theta_deg,phi_deg,fwhm_MHz,mc_error_MHz
bath-field    -> bath_field.csv:      direction_label,B_mT,fwhm_MHz,mc_error_MHz
single-emitter-> single_emitter.csv:  config_id,detuning_MHz,probability
              -> single_emitter_report.json (strong spins, far-bath FWHM, lines)
er-er         -> er_er.csv:           theta_deg,phi_deg,fwhm_MHz,mc_error_MHz
lineshape     -> lorentzian.csv, gaussian.csv, holtsmark.csv:  x,density
              -> scaling_fit.json (exponents with and without censored points)
cavity        -> cavity_report.json
fit           -> result.json (params, sigma, residual_norm, dof, converged)
synth         -> dataset CSVs plus <kind>_truth.json:
                 spectrum:  detuning_MHz,counts
                 sd_series: epoch,detuning_MHz,counts
                 echo:      delay_us,amplitude
                 dephasing: device,tau_pi_us,delay_us,amplitude
                 g2:        trial_index,pulse_index,counts
                 lifetime:  time_us,counts
analyze       -> result.json per kind
table         -> emitter summary CSV: id,sample,P,sd_lw_MHz,detuning_GHz,repetitions
                 plus Mean row; input columns identical
Every subcommand also writes <name>_manifest.json.
"""


class NumericFailure(RuntimeError):
    pass


def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    text = path.read_text().strip().splitlines()
    if not text:
        raise ConfigError(f"input file is empty: {path}")
    header = text[0].split(",")
    return header, [line.split(",") for line in text[1:]]


def _column(header: list[str], rows: list[list[str]], name: str, path: Path) -> np.ndarray:
    if name not in header:
        raise ConfigError(f"missing column {name!r} in {path}")
    i = header.index(name)
    try:
        return np.array([float(r[i]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed column {name!r} in {path}: {exc}") from exc


def write_manifest(out_dir: Path, name: str, cfg: dict, seed: int, workers: int, started: float, artifacts: list[str]) -> None:
    manifest = {
        "tool": "ersi",
        "version": __version__,
        "subcommand": name,
        "seed": seed,
        "workers": workers,
        "config": cfg,
        "numpy_version": np.__version__,
        "wall_time_s": time.time() - started,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "artifacts": artifacts,
    }
    (out_dir / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _ensemble_params(cfg: dict, seed: int, workers: int) -> diffusionmc.EnsembleParams:
    sweep = cfg["sweep"]
    direction = np.asarray(sweep["b_ext_direction"], dtype=float)
    direction = direction / np.linalg.norm(direction)
    bins = int(sweep["histogram_bins"]) or None
    return diffusionmc.EnsembleParams(
        bath=config_mod.build_bath(cfg, seed=seed),
        emitter=config_mod.build_emitter(cfg),
        b_ext_magnitude=float(sweep["b_ext_mT"]) * 1e-3,
        b_ext_direction=tuple(direction),
        realizations=int(sweep["realizations"]),
        histogram_bins=bins,
        fwhm_method=sweep["fwhm_method"],
        workers=workers,
    )


def _angles_of(direction: np.ndarray) -> tuple[float, float]:
    theta = math.degrees(math.acos(max(-1.0, min(1.0, float(direction[2])))))
    phi = math.degrees(math.atan2(float(direction[1]), float(direction[0]))) % 360.0
    return theta, phi


# ---------------------------------------------------------------------------
# Subcommands


def cmd_bath_angle(args, cfg: dict) -> list[str]:
    p = _ensemble_params(cfg, args.seed, args.workers)
    grid_cfg = cfg["sweep"]["angle_grid"]
    if args.arc_only:
        grid = diffusionmc.default_angle_grid(n_theta=0, n_phi=1, arc_points=int(grid_cfg["arc_points"]))
    else:
        grid = diffusionmc.default_angle_grid(
            n_theta=int(grid_cfg["n_theta"]), n_phi=int(grid_cfg["n_phi"]), arc_points=int(grid_cfg["arc_points"])
        )
    points = diffusionmc.angle_sweep(p, grid)
    rows = []
    for pt in points:
        if pt.failed:
            raise NumericFailure(f"angle sweep point failed: {pt.message}")
        theta, phi = _angles_of(pt.direction)
        rows.append((theta, phi, pt.fwhm / 1e6, pt.fwhm_error / 1e6))
    write_csv(Path(args.out) / "bath_angle.csv", ["theta_deg", "phi_deg", "fwhm_MHz", "mc_error_MHz"], rows)
    return ["bath_angle.csv"]


def cmd_bath_field(args, cfg: dict) -> list[str]:
    p = _ensemble_params(cfg, args.seed, args.workers)
    field_mT = [float(m) for m in cfg["sweep"]["field_mT"]]
    if not field_mT:
        field_mT = list(np.geomspace(1.0, 300.0, 24))
    points = diffusionmc.field_sweep(p, [m * 1e-3 for m in field_mT])
    rows = []
    for pt in points:
        if pt.failed:
            raise NumericFailure(f"field sweep point failed: {pt.message}")
        rows.append((pt.label, pt.magnitude * 1e3, pt.fwhm / 1e6, pt.fwhm_error / 1e6))
    write_csv(Path(args.out) / "bath_field.csv", ["direction_label", "B_mT", "fwhm_MHz", "mc_error_MHz"], rows)
    return ["bath_field.csv"]


def cmd_single_emitter(args, cfg: dict) -> list[str]:
    p = _ensemble_params(cfg, args.seed, args.workers)
    rows = []
    report = {}
    for k in range(args.configs):
        bath_seed = args.bath_seed + k
        result = diffusionmc.single_emitter_spectrum(bath_seed, p)
        total = float(result.counts.sum())
        for c, n in zip(result.bin_centers, result.counts):
            rows.append((bath_seed, c / 1e6, n / total))
        report[str(bath_seed)] = {
            "far_bath_fwhm_hz": result.far_bath_fwhm,
            "fwhm_hz": result.fwhm,
            "line_centers_hz": result.line_centers_hz.tolist(),
            "strong_spins": [
                {"position_nm": s.position_nm.tolist(), "shift_hz": s.shift_hz} for s in result.strong_spins
            ],
        }
    out = Path(args.out)
    write_csv(out / "single_emitter.csv", ["config_id", "detuning_MHz", "probability"], rows)
    _write_json(out / "single_emitter_report.json", report)
    return ["single_emitter.csv", "single_emitter_report.json"]


def cmd_er_er(args, cfg: dict) -> list[str]:
    if cfg["bath"]["er_concentration_per_cm3"] <= 0:
        raise ConfigError("config key bath.er_concentration_per_cm3 must be positive for er-er")
    p = _ensemble_params(cfg, args.seed, args.workers)
    grid_cfg = cfg["sweep"]["angle_grid"]
    grid = diffusionmc.default_angle_grid(n_theta=0, n_phi=1, arc_points=int(grid_cfg["arc_points"]))
    points = diffusionmc.angle_sweep(p, grid)
    rows = []
    for pt in points:
        if pt.failed:
            raise NumericFailure(f"er-er sweep point failed: {pt.message}")
        theta, phi = _angles_of(pt.direction)
        rows.append((theta, phi, pt.fwhm / 1e6, pt.fwhm_error / 1e6))
    write_csv(Path(args.out) / "er_er.csv", ["theta_deg", "phi_deg", "fwhm_MHz", "mc_error_MHz"], rows)
    return ["er_er.csv"]


def cmd_lineshape(args, cfg: dict) -> list[str]:
    out = Path(args.out)
    artifacts = []
    x = np.linspace(0.0, 10.0, 501)
    for kind in ("lorentzian", "gaussian"):
        model = lineshape.LineModel(kind=kind, scale=1.0)
        grid = np.linspace(-10.0, 10.0, 501)
        write_csv(out / f"{kind}.csv", ["x", "density"], list(zip(grid, model.density(grid))))
        artifacts.append(f"{kind}.csv")
    write_csv(out / "holtsmark.csv", ["x", "density"], list(zip(x, lineshape.holtsmark_pdf(x))))
    artifacts.append("holtsmark.csv")
    pts = [(float(d), float(w)) for d, w in cfg["lineshape"]["scaling_points"]]
    censored = [bool(c) for c in cfg["lineshape"]["censored"]]
    fit_all = lineshape.scaling_fit(pts)
    kept = [p for p, c in zip(pts, censored) if not c]
    payload = {
        "points": pts,
        "censored": censored,
        "exponent_all": fit_all.exponent,
        "exponent_sigma_all": fit_all.exponent_sigma,
        "prefactor_all": fit_all.prefactor,
    }
    if len(kept) >= 2:
        fit_kept = lineshape.scaling_fit(kept)
        payload["exponent_uncensored"] = fit_kept.exponent
        payload["exponent_sigma_uncensored"] = fit_kept.exponent_sigma
    _write_json(out / "scaling_fit.json", payload)
    artifacts.append("scaling_fit.json")
    return artifacts


def cmd_cavity(args, cfg: dict) -> list[str]:
    cav = config_mod.build_cavity(cfg)
    phot = config_mod.build_photonics(cfg)
    det = cfg["detection"]
    report = cavity_mod.design_report(cav, phot, p_detect_per_shot=float(det["p_detect_per_shot"]), losses=[float(x) for x in det["losses"]])
    _write_json(Path(args.out) / "cavity_report.json", report)
    return ["cavity_report.json"]


_FIT_MODELS = ("lorentzian", "exponential", "rabi", "linear-origin", "saturation")


def cmd_fit(args, cfg: dict) -> list[str]:
    path = Path(args.infile)
    header, rows = read_csv(path)
    x = _column(header, rows, header[0], path)
    y = _column(header, rows, header[1], path)
    try:
        if args.model == "lorentzian":
            fit = fitkit.fit_lorentzian_peak(x, y)
        elif args.model == "exponential":
            fit = fitkit.fit_exponential_decay(x, y)
        elif args.model == "rabi":
            fit = fitkit.fit_sine_rabi(x, y)
        elif args.model == "linear-origin":
            fit = fitkit.fit_linear_origin(x, y)
        else:
            if args.t1 is None:
                raise ConfigError("fit saturation requires --t1")
            fit = fitkit.fit_saturation(x, y, args.t1)
    except fitkit.FitError as exc:
        raise NumericFailure(str(exc)) from exc
    _write_json(Path(args.out), _fit_payload(fit))
    return [str(args.out)]


def _fit_payload(fit: fitkit.FitResult) -> dict:
    return {
        "params": fit.params,
        "sigma": fit.sigma,
        "residual_norm": fit.residual_norm,
        "dof": fit.dof,
        "converged": fit.converged,
        "message": fit.message,
    }


def cmd_synth(args, cfg: dict) -> list[str]:
    out = Path(args.out)
    seed = args.seed
    kind = args.kind
    artifacts = []
    if kind == "spectrum":
        spectrum, truth = speclab.synth_spectrum(seed, fwhm_hz=args.fwhm * 1e6 if args.fwhm else 5.2e6)
        write_csv(out / "spectrum.csv", ["detuning_MHz", "counts"], list(zip(spectrum.detuning_hz / 1e6, spectrum.counts)))
        artifacts.append("spectrum.csv")
    elif kind == "sd_series":
        spectra, truth = speclab.synth_sd_series(seed, fwhm_hz=args.fwhm * 1e6 if args.fwhm else 5.2e6)
        rows = []
        for e, s in enumerate(spectra):
            rows.extend((e, d / 1e6, c) for d, c in zip(s.detuning_hz, s.counts))
        write_csv(out / "sd_series.csv", ["epoch", "detuning_MHz", "counts"], rows)
        artifacts.append("sd_series.csv")
    elif kind == "echo":
        ds, truth = speclab.synth_echo(seed, t2_s=args.t2 if args.t2 else 20e-6, noise_sigma=args.noise)
        write_csv(out / "echo.csv", ["delay_us", "amplitude"], list(zip(ds.delays_s * 1e6, ds.echo_amplitude)))
        truth["tau_pi_s"] = ds.tau_pi_s
        artifacts.append("echo.csv")
    elif kind == "dephasing":
        xi = {"device_a": 10.0, "device_b": 10.0 / 6.0}
        datasets, truth = speclab.synth_dephasing(seed, xi=xi, noise_sigma=args.noise)
        rows = []
        for name, dss in datasets.items():
            for ds in dss:
                rows.extend((name, ds.tau_pi_s * 1e6, d * 1e6, a) for d, a in zip(ds.delays_s, ds.echo_amplitude))
        write_csv(out / "dephasing.csv", ["device", "tau_pi_us", "delay_us", "amplitude"], rows)
        artifacts.append("dephasing.csv")
    elif kind == "g2":
        record, truth = speclab.synth_g2(seed)
        rows = []
        trials, pulses = record.counts.shape
        for t in range(trials):
            for j in range(pulses):
                rows.append((t, j, int(record.counts[t, j])))
        write_csv(out / "g2.csv", ["trial_index", "pulse_index", "counts"], rows)
        truth["trials"] = trials
        truth["pulses"] = pulses
        artifacts.append("g2.csv")
    elif kind == "lifetime":
        (t, y), truth = speclab.synth_lifetime(seed, tau_s=args.t1 if args.t1 else 43e-6)
        write_csv(out / "lifetime.csv", ["time_us", "counts"], list(zip(t * 1e6, y)))
        artifacts.append("lifetime.csv")
    else:
        raise ConfigError(f"unknown synth kind: {kind}")
    _write_json(out / f"{kind}_truth.json", truth)
    artifacts.append(f"{kind}_truth.json")
    return artifacts


def cmd_analyze(args, cfg: dict) -> list[str]:
    src = Path(args.infile)
    kind = args.kind
    header = rows = None
    if kind != "sd_series":
        header, rows = read_csv(src)
    try:
        if kind == "spectrum":
            x = _column(header, rows, "detuning_MHz", src) * 1e6
            y = _column(header, rows, "counts", src)
            fit = fitkit.fit_lorentzian_peak(x, y)
            payload = _fit_payload(fit)
        elif kind == "sd_series":
            header, rows = read_csv(src)
            epochs = _column(header, rows, "epoch", src).astype(int)
            det = _column(header, rows, "detuning_MHz", src) * 1e6
            cnt = _column(header, rows, "counts", src)
            spectra = []
            for e in sorted(set(int(e) for e in epochs)):
                mask = epochs == e
                spectra.append(speclab.Spectrum(detuning_hz=det[mask], counts=cnt[mask]))
            res = speclab.sd_linewidth(spectra)
            payload = _fit_payload(res.fit)
            payload["max_center_excursion_hz"] = res.max_center_excursion_hz
            payload["epoch_mean_fwhm_hz"] = res.epoch_mean_fwhm_hz
        elif kind == "echo":
            delays = _column(header, rows, "delay_us", src) * 1e-6
            amp = _column(header, rows, "amplitude", src)
            ds = speclab.EchoDataset(delays_s=delays, echo_amplitude=amp, tau_pi_s=1e-6)
            payload = _fit_payload(speclab.echo_t2(ds))
        elif kind == "dephasing":
            devices: dict[str, dict[float, list[tuple[float, float]]]] = {}
            i_dev, i_tau = header.index("device"), header.index("tau_pi_us")
            i_del, i_amp = header.index("delay_us"), header.index("amplitude")
            for r in rows:
                devices.setdefault(r[i_dev], {}).setdefault(float(r[i_tau]), []).append((float(r[i_del]), float(r[i_amp])))
            datasets = {}
            for name, groups in devices.items():
                dss = []
                for tau_us, pts in sorted(groups.items()):
                    pts.sort()
                    dss.append(
                        speclab.EchoDataset(
                            delays_s=np.array([p[0] for p in pts]) * 1e-6,
                            echo_amplitude=np.array([p[1] for p in pts]),
                            tau_pi_s=tau_us * 1e-6,
                        )
                    )
                datasets[name] = dss
            res = speclab.dephasing_scaling(datasets)
            payload = {
                "xi": {k: {"value": v[0], "sigma": v[1]} for k, v in res.xi.items()},
                "ratio": None if res.ratio is None else {"value": res.ratio[0], "sigma": res.ratio[1]},
            }
        elif kind == "g2":
            trial = _column(header, rows, "trial_index", src).astype(int)
            pulse = _column(header, rows, "pulse_index", src).astype(int)
            counts = _column(header, rows, "counts", src).astype(int)
            n_tr, n_pu = trial.max() + 1, pulse.max() + 1
            mat = np.zeros((n_tr, n_pu), dtype=np.int64)
            mat[trial, pulse] = counts
            truth_path = src.with_name("g2_truth.json")
            dark_rate, window = 0.0, 1.0
            if truth_path.exists():
                truth = json.loads(truth_path.read_text())
                dark_rate, window = truth["dark_rate_hz"], truth["window_s"]
            record = speclab.PhotonRecord(counts=mat, dark_count_rate_hz=dark_rate, window_s=window)
            res = speclab.g2_pulsed(record)
            payload = {
                "g2_zero_raw": res.g2_zero_raw,
                "g2_zero_corrected": res.g2_zero_corrected,
                "mean_counts_per_pulse": res.mean_counts_per_pulse,
                "mean_signal_per_pulse": res.mean_signal_per_pulse,
            }
        elif kind == "lifetime":
            t = _column(header, rows, "time_us", src) * 1e-6
            y = _column(header, rows, "counts", src)
            payload = _fit_payload(fitkit.fit_exponential_decay(t, y))
        else:
            raise ConfigError(f"unknown analyze kind: {kind}")
    except (fitkit.FitError, ValueError) as exc:
        raise NumericFailure(str(exc)) from exc
    _write_json(Path(args.out), payload)
    return [str(args.out)]


def cmd_table(args, cfg: dict) -> list[str]:
    src = Path(args.infile)
    header, rows = read_csv(src)
    required = ["id", "sample", "P", "P_sigma", "sd_lw_MHz", "sd_lw_sigma_MHz", "detuning_GHz", "repetitions"]
    for col in required:
        if col not in header:
            raise ConfigError(f"missing column {col!r} in {src}")
    idx = {c: header.index(c) for c in required}
    emitter_rows = [
        speclab.EmitterRow(
            emitter_id=r[idx["id"]],
            sample=r[idx["sample"]],
            purcell=float(r[idx["P"]]),
            purcell_sigma=float(r[idx["P_sigma"]]),
            sd_lw_mhz=float(r[idx["sd_lw_MHz"]]),
            sd_lw_sigma_mhz=float(r[idx["sd_lw_sigma_MHz"]]),
            detuning_ghz=float(r[idx["detuning_GHz"]]),
            repetitions_millions=float(r[idx["repetitions"]]),
        )
        for r in rows
    ]
    table = speclab.emitter_table(emitter_rows)
    out_rows = [
        (
            r.emitter_id,
            r.sample,
            speclab.format_value_uncertainty(r.purcell, r.purcell_sigma),
            speclab.format_value_uncertainty(r.sd_lw_mhz, r.sd_lw_sigma_mhz),
            r.detuning_ghz,
            r.repetitions_millions,
        )
        for r in table.rows
    ]
    out_rows.append(("Mean", "", table.formatted_means["P"], table.formatted_means["sd_lw_MHz"], "", ""))
    write_csv(Path(args.out) / "emitter_table.csv", ["id", "sample", "P", "sd_lw_MHz", "detuning_GHz", "repetitions"], out_rows)
    return ["emitter_table.csv"]


# ---------------------------------------------------------------------------
# Parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ersi",
        description="Spectral diffusion, cavity and spectroscopy toolkit for erbium emitters in silicon.",
    )
    parser.add_argument("--schema", action="store_true", help="print the CSV column schemas and exit")
    parser.add_argument("--version", action="version", version=f"ersi {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def common(p, needs_seed=True):
        p.add_argument("--config", default=None, help="TOML or JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        if needs_seed:
            p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
            p.add_argument("--workers", type=int, default=None, help="worker processes (overrides config)")

    p = sub.add_parser("bath-angle", help="nuclear-spin-bath FWHM versus bias-field direction")
    common(p)
    p.add_argument("--arc-only", action="store_true", help="only the fine [001]-[110] arc, not the full sphere grid")

    p = sub.add_parser("bath-field", help="nuclear-spin-bath FWHM versus bias-field magnitude")
    common(p)

    p = sub.add_parser("single-emitter", help="frozen-configuration single-emitter spectra")
    common(p)
    p.add_argument("--bath-seed", type=int, default=100, help="seed fixing the nuclear configuration")
    p.add_argument("--configs", type=int, default=3, help="number of random configurations")

    p = sub.add_parser("er-er", help="Er-Er dipolar linewidth versus bias direction")
    common(p)

    p = sub.add_parser("lineshape", help="line-shape model tables and width-scaling fit")
    common(p, needs_seed=False)

    p = sub.add_parser("cavity", help="resonator and Purcell design report")
    common(p, needs_seed=False)

    p = sub.add_parser("fit", help="fit a parametric model to a two-column CSV")
    p.add_argument("model", choices=_FIT_MODELS)
    p.add_argument("--in", dest="infile", required=True, help="input CSV (x, y columns)")
    p.add_argument("--out", default="result.json", help="output JSON path")
    p.add_argument("--t1", type=float, default=None, help="known lifetime for the saturation model, seconds")
    p.add_argument("--config", default=None, help="TOML or JSON run configuration")

    p = sub.add_parser("synth", help="generate a synthetic dataset with embedded ground truth")
    p.add_argument("kind", choices=["spectrum", "sd_series", "echo", "dephasing", "g2", "lifetime"])
    common(p)
    p.add_argument("--t2", type=float, default=None, help="echo coherence time, seconds")
    p.add_argument("--t1", type=float, default=None, help="lifetime, seconds")
    p.add_argument("--fwhm", type=float, default=None, help="spectrum linewidth, MHz")
    p.add_argument("--noise", type=float, default=0.01, help="gaussian noise level for echo-type data")

    p = sub.add_parser("analyze", help="run the analysis pipeline for a dataset kind")
    p.add_argument("kind", choices=["spectrum", "sd_series", "echo", "dephasing", "g2", "lifetime"])
    p.add_argument("--in", dest="infile", required=True, help="input CSV")
    p.add_argument("--out", default="result.json", help="output JSON path")
    p.add_argument("--config", default=None, help="TOML or JSON run configuration")

    p = sub.add_parser("table", help="emitter summary table with mean(uncertainty) row")
    p.add_argument("--in", dest="infile", required=True, help="per-emitter CSV")
    common(p, needs_seed=False)

    return parser


_HANDLERS = {
    "bath-angle": cmd_bath_angle,
    "bath-field": cmd_bath_field,
    "single-emitter": cmd_single_emitter,
    "er-er": cmd_er_er,
    "lineshape": cmd_lineshape,
    "cavity": cmd_cavity,
    "fit": cmd_fit,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "table": cmd_table,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema if hasattr(args, "schema") else False:
        print(CSV_SCHEMAS, end="")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    started = time.time()
    try:
        cfg = config_mod.load_config(getattr(args, "config", None))
        seed = getattr(args, "seed", None)
        if seed is None:
            seed = int(cfg["execution"]["seed"])
        workers = getattr(args, "workers", None)
        if workers is None:
            workers = int(cfg["execution"]["workers"])
        args.seed, args.workers = seed, workers
        out_dir = Path(getattr(args, "out", "out"))
        writes_dir = args.command not in ("fit", "analyze")
        if writes_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
        artifacts = _HANDLERS[args.command](args, cfg)
        if writes_dir:
            write_manifest(out_dir, args.command.replace("-", "_"), cfg, seed, workers, started, artifacts)
    except ConfigError as exc:
        _emit_error("config", str(exc))
        return EXIT_CONFIG
    except NumericFailure as exc:
        _emit_error("numeric", str(exc))
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as exc:
        _emit_error("numeric", str(exc))
        return EXIT_NUMERIC
    return EXIT_OK


def _emit_error(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}) + "\n")


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
