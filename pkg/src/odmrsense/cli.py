"""Command-line interface.

Subcommands: simulate (synthetic spectra), fit (peak fitting), calibrate
(segmented calibration fits and readout inversion), zfs (dipolar tensor
from orbital cubes), sensitivity (shot-noise figure).

Every output is byte-deterministic: JSON is dumped with sorted keys,
floats go through repr, and nothing timestamps itself.  Parameters come
from CLI flags, the ODMRSENSE_* environment, or a JSON config file, in
that order of precedence.  Exit codes: 0 success, 1 computation failure
(e.g. a fit that did not converge), 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import jsonschema

from . import calibration, dipolar, kinetics, spectra, spin, volumetric
from .errors import (
    DataFormatError,
    ConfigError,
    GridMismatchError,
    InvalidParameterError,
    OdmrSenseError,
)

_KINETICS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "pump_rate": {"type": "number", "minimum": 0},
        "radiative_rate": {"type": "number", "minimum": 0},
        "isc_rate": {"type": "number", "minimum": 0},
        "isc_branching": {
            "type": "array", "items": {"type": "number"},
            "minItems": 3, "maxItems": 3,
        },
        "triplet_decay": {
            "type": "array", "items": {"type": "number"},
            "minItems": 3, "maxItems": 3,
        },
        "mw_rate": {"type": "number", "minimum": 0},
        "mw_pair": {"enum": ["xy", "yz", "xz"]},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": ["integer", "null"]},
        "threads": {"type": "integer", "minimum": 1},
        "kinetics": _KINETICS_SCHEMA,
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_mhz": {"type": "number"},
                "e_mhz": {"type": "number"},
                "linewidth_fwhm": {"type": "number", "exclusiveMinimum": 0},
                "shape_mix": {"type": "number", "minimum": 0, "maximum": 1},
                "noise_sigma": {"type": "number", "minimum": 0},
                "mw_rate": {"type": "number", "exclusiveMinimum": 0},
                "amplitudes": {
                    "type": ["array", "null"], "items": {"type": "number"},
                    "minItems": 3, "maxItems": 3,
                },
                "fmin": {"type": "number"},
                "fmax": {"type": "number"},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "windows": {"type": "boolean"},
                "window_half": {"type": "number", "exclusiveMinimum": 0},
                "control_value": {"type": ["number", "null"]},
                "control_unit": {"type": ["string", "null"]},
            },
        },
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "centers": {"type": ["array", "null"], "items": {"type": "number"}},
                "fwhm_guess": {"type": "number", "exclusiveMinimum": 0},
                "mix_guess": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "calibrate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "segments": {"type": "integer", "minimum": 1},
                "invert_frequency": {"type": ["number", "null"]},
            },
        },
        "zfs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["convolution", "direct"]},
                "cutoff_angstrom": {"type": ["number", "null"]},
            },
        },
        "sensitivity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "tau_s": {"type": "number", "exclusiveMinimum": 0},
                "signal_slope": {"type": "number", "exclusiveMinimum": 0},
                "calib_slope": {"type": "number", "exclusiveMinimum": 0},
                "unit": {"type": "string"},
            },
        },
    },
}


def load_config(path) -> dict:
    """Read and schema-validate a JSON run configuration."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {exc.message} (at {where})") from exc
    return data


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"environment variable {name}={raw!r} is not an integer") from exc


def _resolve(flag_value, env_name: str | None, config_value, default):
    """Precedence: explicit flag > environment > config file > default."""
    if flag_value is not None:
        return flag_value
    if env_name is not None:
        env_value = _env_int(env_name)
        if env_value is not None:
            return env_value
    if config_value is not None:
        return config_value
    return default


def _section(config: dict, name: str) -> dict:
    return config.get(name) or {}


def _pick(args_value, section: dict, key: str, default):
    if args_value is not None:
        return args_value
    if key in section and section[key] is not None:
        return section[key]
    return default


def _dump_json(payload: dict, path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def write_svg(path, x, y, width: int = 640, height: int = 360,
              title: str = "") -> None:
    """Minimal deterministic polyline plot."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    margin = 40.0
    spanx = x.max() - x.min() or 1.0
    spany = y.max() - y.min() or 1.0
    px = margin + (x - x.min()) / spanx * (width - 2 * margin)
    py = height - margin - (y - y.min()) / spany * (height - 2 * margin)
    points = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin}" y="20" font-size="12">{title}</text>',
        (f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}"'
         f' height="{height - 2 * margin}" fill="none" stroke="black"/>'),
        f'<polyline points="{points}" fill="none" stroke="steelblue"/>',
        "</svg>",
    ]
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def _kinetics_params(config: dict) -> kinetics.KineticsParams:
    section = _section(config, "kinetics")
    kwargs = dict(section)
    if "isc_branching" in kwargs:
        kwargs["isc_branching"] = tuple(kwargs["isc_branching"])
    if "triplet_decay" in kwargs:
        kwargs["triplet_decay"] = tuple(kwargs["triplet_decay"])
    return kinetics.KineticsParams(**kwargs)


def _cmd_simulate(args, config: dict) -> int:
    section = _section(config, "simulate")
    d_mhz = _pick(args.d_mhz, section, "d_mhz", 1392.0)
    e_mhz = _pick(args.e_mhz, section, "e_mhz", 53.0)
    fwhm = _pick(args.linewidth, section, "linewidth_fwhm", 4.3)
    mix = _pick(args.shape_mix, section, "shape_mix", 1.0)
    noise = _pick(args.noise, section, "noise_sigma", 0.0)
    mw_rate = _pick(args.mw_rate, section, "mw_rate", 0.05)
    step = _pick(args.step, section, "step", 0.5)
    windows = args.windows or bool(section.get("windows", False))
    window_half = _pick(args.window_half, section, "window_half", 25.0)
    control_value = _pick(args.control_value, section, "control_value", None)
    control_unit = _pick(args.control_unit, section, "control_unit", None)
    seed = _resolve(args.seed, "ODMRSENSE_SEED", config.get("seed"), None)

    transitions = spin.transitions_from_zfs(spin.ZfsParameters(d_mhz, e_mhz))
    if args.amplitudes is not None:
        amps = [float(v) for v in args.amplitudes.split(",")]
        if len(amps) != 3:
            raise InvalidParameterError("--amplitudes needs three comma-separated values")
    elif section.get("amplitudes") is not None:
        amps = [float(v) for v in section["amplitudes"]]
    else:
        contrast = kinetics.contrast_spectrum_amplitudes(_kinetics_params(config), mw_rate)
        amps = [contrast["xy"], contrast["yz"], contrast["xz"]]

    centers = [transitions.f_xy, transitions.f_yz, transitions.f_xz]
    lines = [spectra.LineModel.symmetric(c, fwhm, a, mix)
             for c, a in zip(centers, amps)]
    if windows:
        grids = [np.arange(c - window_half, c + window_half + step / 2.0, step)
                 for c in sorted(centers)]
        freqs = np.unique(np.concatenate(grids))
    else:
        fmin = _pick(args.fmin, section, "fmin", 50.0)
        fmax = _pick(args.fmax, section, "fmax", 1500.0)
        if fmax <= fmin:
            raise InvalidParameterError("fmax must exceed fmin")
        freqs = np.arange(fmin, fmax + step / 2.0, step)

    spectrum = spectra.synthesize(lines, freqs, noise_sigma=noise, seed=seed,
                                  control_value=control_value,
                                  control_unit=control_unit)
    spectra.write_spectrum(spectrum, args.out)
    if args.svg:
        write_svg(args.svg, spectrum.freqs_mhz, spectrum.signal,
                  title="simulated spectrum")
    return 0


def _cmd_fit(args, config: dict) -> int:
    section = _section(config, "fit")
    spectrum = spectra.read_spectrum(args.input)
    centers = section.get("centers")
    if args.centers is not None:
        centers = [float(v) for v in args.centers.split(",")]
    fwhm_guess = _pick(args.fwhm_guess, section, "fwhm_guess", 4.0)
    mix_guess = _pick(args.mix_guess, section, "mix_guess", 0.5)

    guesses = None
    if centers:
        baseline = float(np.median(spectrum.signal))
        guesses = []
        for center in centers:
            k = int(np.argmin(np.abs(spectrum.freqs_mhz - center)))
            amp = float(spectrum.signal[k] - baseline) or 1e-6
            guesses.append(spectra.LineModel.symmetric(center, fwhm_guess, amp, mix_guess))
    fits = spectra.fit_peaks(spectrum, guesses)
    payload = {
        "peaks": [f.to_dict() for f in fits],
        "noise_sigma": spectra.robust_noise_sigma(spectrum),
        "n_samples": len(spectrum),
    }
    _dump_json(payload, args.out)
    if not all(f.converged for f in fits):
        print("fit did not converge", file=sys.stderr)
        return 1
    return 0


def _cmd_calibrate(args, config: dict) -> int:
    section = _section(config, "calibrate")
    series = calibration.read_calibration(args.input)
    n_segments = _pick(args.segments, section, "segments", 1)
    fit = calibration.segmented_fit(series, n_segments)
    payload = fit.to_dict()
    invert = _pick(args.invert_frequency, section, "invert_frequency", None)
    if invert is not None:
        control, sigma = calibration.invert_readout(fit, invert)
        payload["readout"] = {
            "frequency_mhz": invert,
            "control": control,
            "control_sigma": sigma if np.isfinite(sigma) else None,
        }
    _dump_json(payload, args.out)
    if args.svg:
        asc = series.ascending()
        write_svg(args.svg, asc.control, asc.freq_mhz, title="calibration series")
    return 0


def _stats_dict(stats: volumetric.OrbitalStats) -> dict:
    return {
        "norm": stats.norm,
        "centroid_angstrom": [float(v) for v in stats.centroid],
        "spread_angstrom": [float(v) for v in stats.spread],
    }


def _analyse_phase(homo_path, lumo_path, method, cutoff, threads) -> dict:
    homo = volumetric.load_cube(homo_path)
    lumo = volumetric.load_cube(lumo_path)
    homo_stats = volumetric.orbital_stats(homo)
    lumo_stats = volumetric.orbital_stats(lumo)
    tensor = dipolar.zfs_pair_tensor(homo, lumo, method=method,
                                     cutoff_angstrom=cutoff, threads=threads)
    eigenvalues, _ = spin.ordered_eigensystem(tensor)
    params, _ = spin.tensor_to_parameters(tensor)
    return {
        "homo_stats": _stats_dict(homo_stats),
        "lumo_stats": _stats_dict(lumo_stats),
        "homo_lumo_shift_pm": [
            float(v) for v in volumetric.homo_lumo_shift(homo_stats, lumo_stats)],
        "tensor_mhz": [[float(v) for v in row] for row in tensor.tensor],
        "eigenvalues_mhz": [float(v) for v in eigenvalues],
        "d_mhz": float(params.D),
        "e_mhz": float(params.E),
    }


def _cmd_zfs(args, config: dict) -> int:
    section = _section(config, "zfs")
    method = _pick(args.method, section, "method", "convolution")
    cutoff = _pick(args.cutoff, section, "cutoff_angstrom", None)
    threads = _resolve(args.threads, "ODMRSENSE_THREADS", config.get("threads"), 1)

    jobs = [("a", args.homo, args.lumo)]
    if args.homo_b or args.lumo_b:
        if not (args.homo_b and args.lumo_b):
            raise InvalidParameterError("--homo-b and --lumo-b must come together")
        jobs.append(("b", args.homo_b, args.lumo_b))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            futures = [pool.submit(_analyse_phase, h, l, method, cutoff, threads)
                       for _, h, l in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_analyse_phase(h, l, method, cutoff, threads) for _, h, l in jobs]

    phases = {name: result for (name, _, _), result in zip(jobs, results)}
    payload: dict = {
        "method": method,
        "cutoff_angstrom": cutoff,
        "phases": phases,
        "comparison": None,
    }
    if len(jobs) == 2:
        tensor_a = spin.ZfsTensor(np.asarray(phases["a"]["tensor_mhz"]))
        tensor_b = spin.ZfsTensor(np.asarray(phases["b"]["tensor_mhz"]))
        payload["comparison"] = dipolar.compare_phases(tensor_a, tensor_b).to_dict()
    _dump_json(payload, args.out)

    if args.table:
        rows = ["phase,eig_x_mhz,eig_y_mhz,eig_z_mhz,d_mhz,e_mhz"]
        for name in sorted(phases):
            ph = phases[name]
            ex, ey, ez = ph["eigenvalues_mhz"]
            rows.append(f"{name},{ex!r},{ey!r},{ez!r},{ph['d_mhz']!r},{ph['e_mhz']!r}")
        Path(args.table).write_text("\n".join(rows) + "\n", encoding="utf-8")
    return 0


def _cmd_sensitivity(args, config: dict) -> int:
    section = _section(config, "sensitivity")
    sigma = _pick(args.sigma, section, "sigma", None)
    tau_s = _pick(args.tau, section, "tau_s", None)
    signal_slope = _pick(args.signal_slope, section, "signal_slope", None)
    calib_slope = _pick(args.calib_slope, section, "calib_slope", None)
    unit = _pick(args.unit, section, "unit", "")
    missing = [name for name, val in (("sigma", sigma), ("tau", tau_s),
                                      ("signal-slope", signal_slope),
                                      ("calib-slope", calib_slope)) if val is None]
    if missing:
        raise InvalidParameterError(f"missing sensitivity inputs: {', '.join(missing)}")
    report = calibration.sensitivity(sigma, tau_s, signal_slope, calib_slope, unit)
    _dump_json(report.to_dict(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="RNG seed (overrides ODMRSENSE_SEED)")
    common.add_argument("--threads", type=int,
                        help="worker threads (overrides ODMRSENSE_THREADS)")

    parser = argparse.ArgumentParser(
        prog="odmrsense",
        description="Triplet ODMR spectra: simulation, fitting, calibration, "
                    "dipolar tensors and sensitivity figures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="synthesize a three-line ODMR spectrum")
    p.add_argument("--d-mhz", type=float)
    p.add_argument("--e-mhz", type=float)
    p.add_argument("--linewidth", type=float, help="FWHM in MHz")
    p.add_argument("--shape-mix", type=float)
    p.add_argument("--amplitudes", help="three comma-separated line amplitudes")
    p.add_argument("--mw-rate", type=float,
                   help="microwave rate for kinetics-derived amplitudes (1/us)")
    p.add_argument("--noise", type=float)
    p.add_argument("--fmin", type=float)
    p.add_argument("--fmax", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--windows", action="store_true",
                   help="sample only windows around each line")
    p.add_argument("--window-half", type=float)
    p.add_argument("--control-value", type=float)
    p.add_argument("--control-unit")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--svg", help="optional SVG plot path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit resonance lines")
    p.add_argument("--input", required=True, help="spectrum CSV")
    p.add_argument("--centers", help="comma-separated center guesses in MHz")
    p.add_argument("--fwhm-guess", type=float)
    p.add_argument("--mix-guess", type=float)
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("calibrate", parents=[common],
                       help="segmented linear calibration fit")
    p.add_argument("--input", required=True, help="calibration CSV")
    p.add_argument("--segments", type=int)
    p.add_argument("--invert-frequency", type=float,
                   help="also invert this frequency back to the control value")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.add_argument("--svg", help="optional SVG plot path")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("zfs", parents=[common],
                       help="dipolar fine-structure tensor from orbital cubes")
    p.add_argument("--homo", required=True, help="HOMO cube file")
    p.add_argument("--lumo", required=True, help="LUMO cube file")
    p.add_argument("--homo-b", help="second-phase HOMO cube")
    p.add_argument("--lumo-b", help="second-phase LUMO cube")
    p.add_argument("--method", choices=["convolution", "direct"])
    p.add_argument("--cutoff", type=float, help="kernel cutoff in angstrom")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.add_argument("--table", help="optional eigenvalue CSV path")
    p.set_defaults(func=_cmd_zfs)

    p = sub.add_parser("sensitivity", parents=[common],
                       help="shot-noise sensitivity figure")
    p.add_argument("--sigma", type=float, help="per-shot signal noise")
    p.add_argument("--tau", type=float, help="shot duration in seconds")
    p.add_argument("--signal-slope", type=float, help="signal change per MHz")
    p.add_argument("--calib-slope", type=float, help="MHz per control unit")
    p.add_argument("--unit", help="label for the resulting eta unit")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {}
        return args.func(args, config)
    except (DataFormatError, InvalidParameterError, GridMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OdmrSenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
