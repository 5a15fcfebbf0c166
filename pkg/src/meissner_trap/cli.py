"""Command-line front end: ``meissner-trap fieldmap|trap|sweep|odmr|ringdown``.

Exit codes: 0 success, 2 config or input error, 3 field singularity,
4 no stable trap, 5 fit failure, 6 no oscillation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, ConfigError, load_config, parse_quantity
from .dynamics import (
    FitNotConvergedError as RingdownFitError,
    NoOscillationError,
    TimeSeries,
    TooShortError,
    fit_ringdown,
    psd,
    read_frame_stack,
    render_frames,
    simulate_ringdown,
    track_centroid,
    write_frame_stack,
)
from .io import atomic_write_text, format_report, read_csv, write_csv
from .magnetics import FluxConcentratorCoil, SingularityError, compile_assembly
from .nv import (
    DiamondCut100,
    FitNotConvergedError as OdmrFitError,
    LorentzianDipFitter,
    NoSolutionError,
    TooFewDipsError,
    ZeemanModel,
    invert_field_magnitude,
    odmr_current_sweep,
    odmr_forward,
)
from .trap import (
    ZETA_DEFINITION,
    NoMinimumError,
    Particle,
    SaddlePointError,
    TrapConfig,
    bc1_breach_current,
    characterize,
    current_sweep,
    separation_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_NO_TRAP, EXIT_FIT, EXIT_NO_OSC = 0, 2, 3, 4, 5, 6
THREADS_ENV = "MEISSNER_TRAP_THREADS"

FIELDMAP_HEADER = ["x_m", "y_m", "z_m", "Bx_T", "By_T", "Bz_T", "Bnorm_T"]
SWEEP_COLUMNS = ["fx_Hz", "fy_Hz", "fz_Hz", "gradx_T_per_m", "grady_T_per_m", "gradz_T_per_m",
                 "zeta_x", "zeta_y", "zeta_z", "Bhot_T"]
SPECTRUM_HEADER = ["freq_Hz", "signal"]
LINES_HEADER = ["center_Hz", "fwhm_Hz", "depth", "center_err_Hz"]
HEATMAP_HEADER = ["current_A", "freq_Hz", "signal"]
SERIES_HEADER = ["t_s", "x_m"]
PSD_HEADER = ["freq_Hz", "power_m2_per_Hz"]
AXES = {"x": 0, "y": 1, "z": 2}


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ builders


def build_trap(cfg: Config, gravity: float | None = None) -> TrapConfig:
    particle = Particle(cfg.particle.radius_m, cfg.particle.density_kg_per_m3)
    g = cfg.trap.gravity_m_per_s2 if gravity is None else gravity
    return TrapConfig.nominal(cfg.trap.separation_m, cfg.coil.current_top_a,
                            cfg.coil.current_bottom_a, g, particle, state=cfg.coil.state,
                            slit_width=cfg.coil.slit_width_m, n_sheet=cfg.coil.n_sheet)


def build_coil(cfg: Config, current: float = 1.0) -> FluxConcentratorCoil:
    return FluxConcentratorCoil.nominal(current=current, state=cfg.coil.state,
                                      slit_width=cfg.coil.slit_width_m, n_sheet=cfg.coil.n_sheet)


def zeeman_model(cfg: Config) -> ZeemanModel:
    return ZeemanModel(cfg.nv.zfs_hz, cfg.nv.gamma_hz_per_t)


def nv_grid(cfg: Config) -> np.ndarray:
    return np.linspace(cfg.nv.grid_start_hz, cfg.nv.grid_stop_hz, cfg.nv.grid_points)


def parse_range(spec: str, unit: str | None) -> np.ndarray:
    """``'min:max:count'`` with optional unit-suffixed bounds."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise CliError(f"range {spec!r} must be min:max:count")
    try:
        lo, hi = parse_quantity(parts[0], unit), parse_quantity(parts[1], unit)
        n = int(parts[2])
    except (ValueError, ConfigError) as exc:
        raise CliError(f"range {spec!r}: {exc}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise CliError(f"range {spec!r}: need count >= 1 and max > min")
    return np.linspace(lo, hi, n)


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    elif os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise CliError("thread count must be >= 1")
    return n


def _emit_report(text: str, path: str | None):
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ commands


def cmd_fieldmap(args, cfg: Config) -> int:
    a0, a1 = (AXES[c] for c in args.plane)
    specs = args.grid.split(",")
    if len(specs) != 2:
        raise CliError("--grid needs two comma-separated ranges, one per plane axis")
    u, v = parse_range(specs[0], "m"), parse_range(specs[1], "m")
    uu, vv = np.meshgrid(u, v, indexing="ij")  # first plane axis varies slowest
    pts = np.zeros((uu.size, 3))
    pts[:, a0], pts[:, a1] = uu.ravel(), vv.ravel()
    fixed = 3 - a0 - a1
    pts[:, fixed] = parse_quantity(args.offset, "m")
    asm = compile_assembly(build_trap(cfg).coils)
    chunks = np.array_split(pts, max(1, min(args.threads, len(pts) // 256 or 1)))
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        b = np.concatenate(list(pool.map(asm.field, chunks)))
    rows = np.column_stack([pts, b, np.linalg.norm(b, axis=1)])
    write_csv(args.out, FIELDMAP_HEADER, rows, f"fieldmap/{args.plane}")
    return EXIT_OK


def cmd_trap(args, cfg: Config) -> int:
    trap = build_trap(cfg)
    ch = characterize(trap)
    text = ch.summary()
    if args.bc1 is not None:
        b_c1 = parse_quantity(args.bc1, "T")
        text += format_report({"bc1_t": b_c1, "breach_current_a": bc1_breach_current(trap, b_c1)})
    _emit_report(text, args.out)
    return EXIT_OK


def cmd_sweep(args, cfg: Config) -> int:
    g = cfg.trap.sweep_gravity_m_per_s2
    if args.current:
        values = parse_range(args.current, "A")
        if values[0] <= 0:
            raise CliError("sweep currents must be positive")
        res = current_sweep(build_trap(cfg), values, gravity=g, workers=args.threads)
        first = "I_A"
    else:
        values = parse_range(args.separation, "m")
        if values[0] <= 0:
            raise CliError("separations must be positive")
        res = separation_sweep(build_trap(cfg), values, current=cfg.coil.current_top_a,
                               gravity=g, workers=args.threads)
        first = "d_m"
    rows = np.column_stack([res.values, res.frequencies, res.gradients, res.zeta, res.b_hot])
    write_csv(args.out, [first] + SWEEP_COLUMNS, rows, f"sweep/{res.parameter}")
    report = {"parameter": res.parameter, "points": len(values), "gravity_m_per_s2": float(g),
              "zeta_definition": ZETA_DEFINITION}
    if first == "I_A":
        for ax, r2, s in zip("xyz", res.r_squared, res.slopes):
            report[f"r_squared_f{ax}"] = float(r2)
            report[f"slope_f{ax}_hz_per_a"] = float(s)
    else:
        f = res.frequencies
        order = np.argsort(res.values)
        mono = bool(np.all(np.diff(f[order], axis=0) < 0))
        report["frequencies_decrease_with_separation"] = str(mono).lower()
    _emit_report(format_report(report), args.report)
    return EXIT_OK


def cmd_odmr(args, cfg: Config) -> int:
    zm = zeeman_model(cfg)
    cut = DiamondCut100()
    if args.mode == "simulate":
        b = np.array([cfg.nv.bx_t, cfg.nv.by_t, cfg.nv.bz_t])
        spec = odmr_forward(zm, b, cut, cfg.nv.linewidth_hz, cfg.nv.contrast, nv_grid(cfg))
        sig = spec.signal
        if cfg.nv.noise_rms > 0:
            rng = np.random.default_rng(cfg.analysis.seed)
            sig = sig + rng.normal(0.0, cfg.nv.noise_rms, sig.size)
        write_csv(args.out, SPECTRUM_HEADER, np.column_stack([spec.frequencies, sig]),
                  "odmr/spectrum")
        return EXIT_OK
    if args.mode == "fit":
        if not args.input:
            raise CliError("odmr fit needs --in SPECTRUM.csv")
        _, data = _read_input_csv(args.input, SPECTRUM_HEADER)
        fit = LorentzianDipFitter(n_dips=None).fit(data[:, 0], data[:, 1])
        lines = fit.lines_
        rows = [(ln.center, ln.fwhm, ln.depth, ln.center_err) for ln in lines]
        report = {"lines": len(lines), "baseline": float(fit.baseline_),
                  "residual_rms": float(fit.residual_rms_)}
        if len(lines) >= 2:
            c = fit.centers_
            err = float(np.hypot(lines[0].center_err, lines[-1].center_err))
            est = invert_field_magnitude(zm, c[0], c[-1], sigma_f=err)
            report.update(magnitude_t=float(est.magnitude), uncertainty_t=float(est.uncertainty),
                          note=est.note or "outermost pair at the (100)-cut angle")
        else:
            report.update(magnitude_t=0.0, note="single line: splitting unresolved")
        write_csv(args.out, LINES_HEADER, np.array(rows), "odmr/lines")
        _emit_report(format_report(report), args.report)
        return EXIT_OK
    # sweep
    currents = np.linspace(cfg.nv.current_start_a, cfg.nv.current_stop_a, cfg.nv.current_count)
    sw = odmr_current_sweep(build_coil(cfg), currents, cfg.nv.height_m, zm, cut,
                            cfg.nv.linewidth_hz, cfg.nv.contrast, nv_grid(cfg),
                            cfg.nv.noise_rms, cfg.analysis.seed)
    write_csv(args.out, HEATMAP_HEADER, sw.long_format(), "odmr/heatmap")
    report = {"state": cfg.coil.state, "height_m": cfg.nv.height_m,
              "slope_mt_per_ma": float(sw.slope), "intercept_t": float(sw.intercept),
              "resolved_points": int(np.count_nonzero(np.isfinite(sw.magnitude)))}
    _emit_report(format_report(report), args.report)
    return EXIT_OK


def _read_input_csv(path, columns):
    try:
        return read_csv(path, columns)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None


def cmd_ringdown(args, cfg: Config) -> int:
    an = cfg.analysis
    if args.mode == "simulate":
        ts = simulate_ringdown(an.f0_hz, an.tau_s, an.drive_duration_s, an.record_duration_s,
                               an.sample_rate_hz, an.noise_rms_m, an.seed, an.amplitude_m)
        write_csv(args.out, SERIES_HEADER, np.column_stack([ts.t, ts.x]), "ringdown/series")
        if args.frames:
            fs = render_frames(ts.x, np.zeros_like(ts.x), an.sample_rate_hz, an.pixel_size_m,
                               noise_rms=10.0, seed=an.seed)
            write_frame_stack(args.frames, fs)
        return EXIT_OK
    if not args.input:
        raise CliError("ringdown fit needs --in SERIES.csv or a frame directory")
    src = Path(args.input)
    if src.is_dir():
        try:
            fs = read_frame_stack(src)
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot read frame stack {src}: {exc}") from None
        tracked = track_centroid(fs)
        ts = tracked[AXES[args.axis]]
    else:
        _, data = _read_input_csv(src, SERIES_HEADER)
        try:
            ts = TimeSeries.from_rounded(data[:, 0], data[:, 1])
        except ValueError as exc:
            raise CliError(f"{src}: {exc}") from None
    fit = fit_ringdown(ts, robust=args.robust)
    seg = min(an.psd_segment, len(ts))
    try:
        f, p = psd(ts, seg, an.psd_overlap)
    except TooShortError as exc:
        raise CliError(str(exc)) from None
    write_csv(args.out, PSD_HEADER, np.column_stack([f, p]), "ringdown/psd")
    _emit_report(fit.report(), args.report)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults apply when omitted)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default: ${THREADS_ENV}, else CPU count)")

    p = argparse.ArgumentParser(prog="meissner-trap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    fm = sub.add_parser("fieldmap", parents=[common], help="field map on a plane")
    fm.add_argument("--plane", choices=["xy", "xz", "yz"], default="xz")
    fm.add_argument("--grid", metavar="U_RANGE,V_RANGE", required=True,
                    help="MIN:MAX:COUNT per plane axis; write --grid=-1mm:1mm:41,-0.5mm:0.5mm:21 "
                         "when a bound is negative")
    fm.add_argument("--offset", default="0", help="coordinate of the plane on the third axis")
    fm.add_argument("--out", required=True)
    fm.set_defaults(func=cmd_fieldmap)

    tr = sub.add_parser("trap", parents=[common], help="characterise the trap")
    tr.add_argument("--bc1", help="lower critical field, e.g. 173.5mT, adds a breach-current line")
    tr.add_argument("--out", help="report path (stdout when omitted)")
    tr.set_defaults(func=cmd_trap)

    sw = sub.add_parser("sweep", parents=[common], help="current or separation sweep")
    grp = sw.add_mutually_exclusive_group(required=True)
    grp.add_argument("--current", metavar="MIN:MAX:COUNT", help="e.g. 0.2:1.7:7")
    grp.add_argument("--separation", metavar="MIN:MAX:COUNT", help="e.g. 0.2mm:2mm:10")
    sw.add_argument("--out", required=True)
    sw.add_argument("--report", help="report path (stdout when omitted)")
    sw.set_defaults(func=cmd_sweep)

    od = sub.add_parser("odmr", parents=[common], help="ODMR simulate, fit or current sweep")
    od.add_argument("mode", choices=["simulate", "fit", "sweep"])
    od.add_argument("--in", dest="input", help="spectrum CSV for fit mode")
    od.add_argument("--out", required=True)
    od.add_argument("--report", help="report path (stdout when omitted)")
    od.set_defaults(func=cmd_odmr)

    rd = sub.add_parser("ringdown", parents=[common], help="ringdown simulate or fit")
    rd.add_argument("mode", choices=["simulate", "fit"])
    rd.add_argument("--in", dest="input", help="time-series CSV or frame-stack directory")
    rd.add_argument("--out", required=True, help="series CSV (simulate) or PSD CSV (fit)")
    rd.add_argument("--frames", help="simulate: also render a frame stack into this directory")
    rd.add_argument("--axis", choices=["x", "y"], default="x", help="tracked axis for frames")
    rd.add_argument("--robust", action="store_true", help="Huber refit against outliers")
    rd.add_argument("--report", help="report path (stdout when omitted)")
    rd.set_defaults(func=cmd_ringdown)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, CliError) as exc:
        code = getattr(exc, "code", EXIT_CONFIG)
        print(f"error: {exc}", file=sys.stderr)
        return code
    except SingularityError as exc:
        print(f"error: field singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NoMinimumError, SaddlePointError) as exc:
        print(f"error: no stable trap: {exc}", file=sys.stderr)
        return EXIT_NO_TRAP
    except NoOscillationError as exc:
        print(f"error: no oscillation: {exc}", file=sys.stderr)
        return EXIT_NO_OSC
    except (OdmrFitError, RingdownFitError, TooFewDipsError, NoSolutionError) as exc:
        print(f"error: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
