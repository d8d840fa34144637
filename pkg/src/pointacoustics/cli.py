"""Command line front end.

Configuration files are flat ``key = value`` lines with ``#`` comments. The
keys ``s``, ``M`` and ``K`` may be repeated to describe a wall array (and
``mu`` to list lattice mass ratios for ``band-sweep``). Every subcommand writes
CSV files into ``--out`` and prints a one-line summary.

Exit status: 0 success, 1 configuration or validation error, 2 numerical
diagnostic.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from pointacoustics import bands, krein, single_wall, timedomain
from pointacoustics.core import Grid, Medium, NumericalDiagnostic, OscillatorArray

MODES = ("single-wall", "spectrum", "bands", "band-sweep", "simulate", "zero-modes")

DEFAULT_MEDIUM = {"a": 343.0, "rho0": 1.21, "S": 0.01}

# key -> (type, must be positive)
_KEYS: dict[str, tuple[str, bool]] = {
    "a": ("float", True), "rho0": ("float", True), "S": ("float", True),
    "s": ("float", False), "M": ("float", True), "K": ("float", True),
    "L": ("float", True), "mu": ("float", True), "r": ("float", True),
    "f": ("profile", False), "g": ("profile", False), "p": ("profile", False), "v": ("profile", False),
    "y0": ("float", False), "z0": ("float", False), "strict_compat": ("bool", False),
    "t_end": ("float", True), "samples": ("int", True),
    "omega_min": ("float", True), "omega_max": ("float", True), "n_omega": ("int", True),
    "incidence": ("incidence", False),
    "xi_max": ("float", True), "xi_cut": ("float", True), "samples_per_band": ("int", True),
    "x_min": ("float", False), "x_max": ("float", False), "h": ("float", True),
    "snapshot_stride": ("int", False), "right_moving": ("bool", False),
}

_MODE_KEYS = {
    "single-wall": {"M", "K", "f", "g", "y0", "z0", "strict_compat", "t_end", "samples"},
    "spectrum": {"s", "M", "K", "omega_min", "omega_max", "n_omega", "incidence"},
    "bands": {"L", "M", "K", "mu", "r", "xi_max", "samples_per_band"},
    "band-sweep": {"mu", "r", "xi_cut"},
    "simulate": {"s", "M", "K", "x_min", "x_max", "h", "t_end", "p", "v", "right_moving", "snapshot_stride"},
    "zero-modes": {"s", "M", "K"},
}
_REQUIRED = {
    "single-wall": {"M", "K"},
    "spectrum": {"s", "M", "K", "omega_min", "omega_max"},
    "bands": set(),  # (L, M, K) or (mu, r), checked separately
    "band-sweep": {"mu", "r"},
    "simulate": {"s", "M", "K", "x_min", "x_max", "h", "t_end"},
    "zero-modes": {"s", "M", "K"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class RunConfig:
    mode: str
    values: dict[str, Any] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)

    @property
    def medium(self) -> Medium:
        return Medium(*(self.values.get(k, DEFAULT_MEDIUM[k]) for k in ("a", "rho0", "S")))

    def get(self, key, default=None):
        return self.values.get(key, default)

    def array(self) -> OscillatorArray:
        s, M, K = (self.values[k] for k in ("s", "M", "K"))
        if not (len(s) == len(M) == len(K)):
            raise ConfigError(f"array lengths differ: {len(s)} positions, {len(M)} masses, {len(K)} stiffnesses")
        try:
            return OscillatorArray(tuple(s), tuple(M), tuple(K))
        except ValueError as exc:
            raise ConfigError(str(exc), self.lines.get("s")) from exc


def _convert(key: str, raw: str, line: int):
    kind, positive = _KEYS[key]
    try:
        if kind == "float":
            val = float(raw)
        elif kind == "int":
            val = int(raw)
        elif kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            val = low in ("true", "1", "yes")
        elif kind == "profile":
            val = single_wall.parse_profile(raw)
        else:
            if raw not in ("+", "-"):
                raise ValueError(raw)
            val = raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})", line) from exc
    if positive and val <= 0:
        raise ConfigError(f"{key} must be positive, got {raw}", line)
    return val


def _entries(text: str):
    """(line number, key, raw value) for every non-blank, non-comment line."""
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        body = raw_line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        yield lineno, key, raw


def parse_config(text: str, mode: str, overrides=()) -> RunConfig:
    """Parse and validate a configuration.

    ``overrides`` are extra ``key = value`` strings applied after ``text``;
    a scalar override replaces the file value and the first override of an
    array key replaces the whole array. Override errors report the position
    after the last file line.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    allowed = _MODE_KEYS[mode] | {"a", "rho0", "S"}
    cfg = RunConfig(mode)
    n_file = len(text.splitlines())
    sources = [(list(_entries(text)), False), (list(_entries("\n".join(overrides))), True)]
    replaced = set()
    for entries, is_override in sources:
        for lineno, key, raw in entries:
            if is_override:
                lineno += n_file
            if key not in _KEYS:
                raise ConfigError(f"unknown key {key!r}", lineno)
            if key not in allowed:
                raise ConfigError(f"key {key!r} is not used by mode {mode}", lineno)
            val = _convert(key, raw, lineno)
            array_key = (key in ("s", "M", "K") and mode in ("spectrum", "simulate", "zero-modes")) or (
                key == "mu" and mode == "band-sweep"
            )
            if is_override and key not in replaced:
                cfg.values.pop(key, None)
                cfg.lines.pop(key, None)
                replaced.add(key)
            if array_key:
                cfg.values.setdefault(key, []).append(val)
                cfg.lines.setdefault(key, lineno)
            else:
                if key in cfg.values:
                    raise ConfigError(f"duplicate key {key!r}", lineno)
                cfg.values[key] = val
                cfg.lines[key] = lineno
    missing = sorted(_REQUIRED[mode] - cfg.values.keys())
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    if mode == "bands":
        dimensional = {"L", "M", "K"} <= cfg.values.keys()
        reduced = {"mu", "r"} <= cfg.values.keys()
        if dimensional == reduced:
            raise ConfigError("bands needs either L, M, K or mu, r (not both)")
    if mode in ("spectrum", "simulate", "zero-modes"):
        cfg.array()
    if mode == "spectrum" and cfg.values["omega_max"] <= cfg.values["omega_min"]:
        raise ConfigError("omega_max must exceed omega_min", cfg.lines["omega_max"])
    if mode == "simulate" and cfg.values["x_max"] <= cfg.values["x_min"]:
        raise ConfigError("x_max must exceed x_min", cfg.lines["x_max"])
    return cfg


# ---------------------------------------------------------------- output helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _plot(path: Path, draw) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------- modes


def _run_single_wall(cfg: RunConfig, out: Path, plot: bool) -> str:
    m = cfg.medium
    params = single_wall.SingleWallParams(m, cfg.get("M"), cfg.get("K"))
    data = single_wall.InitialData(
        cfg.get("f", single_wall.zero()), cfg.get("g", single_wall.zero()), cfg.get("y0"), cfg.get("z0")
    )
    gamma = params.gamma
    t_end = cfg.get("t_end", 20.0 / gamma)
    t = np.linspace(0.0, t_end, cfg.get("samples", 2001))
    cf = single_wall.ClosedForm(data, params, t_end, strict_compat=bool(cfg.get("strict_compat", False)))
    y, yd, Y = cf.y(t), cf.ydot(t), cf.Y(t)
    write_csv(out / "trajectory.csv", ["t", "y", "ydot", "Y"], zip(t, y, yd, Y))
    window = (t >= 5 / gamma) & (t <= 15 / gamma)
    tau_fit = float("nan")
    if window.sum() > 10 and np.any(np.abs(y[window]) > 0):
        tau_fit = single_wall.fit_decay_rate(t[window], y[window], yd[window])
    if plot:
        _plot(out / "trajectory.svg", lambda ax: (ax.plot(t, y, label="y"), ax.set_xlabel("t [s]"), ax.legend()))
    return f"tau_fit={tau_fit:.6g}, tau_theory={single_wall.decay_rate(params):.6g}"


def _run_spectrum(cfg: RunConfig, out: Path, plot: bool) -> str:
    arr, m = cfg.array(), cfg.medium
    omega = np.linspace(cfg.get("omega_min"), cfg.get("omega_max"), cfg.get("n_omega", 200))
    sp = krein.transmission_spectrum(omega, arr, m, cfg.get("incidence", "-"))
    header = ["omega", "re_T", "im_T", "re_R", "im_R", "abs_T2", "abs_R2", "resonance"]
    write_csv(out / "spectrum.csv", header, sp.rows())
    flux = np.max(np.abs(np.abs(sp.T) ** 2 + np.abs(sp.R) ** 2 - 1))
    if plot:
        _plot(out / "spectrum.svg", lambda ax: (ax.plot(omega, np.abs(sp.T) ** 2), ax.set_xlabel("omega [rad/s]"), ax.set_ylabel("|T|^2")))
    return f"points={len(omega)}, min_T2={np.min(np.abs(sp.T) ** 2):.6g}, flux_error={flux:.3g}, resonances={int(sp.resonance.sum())}"


def _lattice(cfg: RunConfig) -> bands.LatticeParams:
    m = cfg.medium
    if "mu" in cfg.values:
        return bands.LatticeParams.from_dimensionless(cfg.get("mu"), cfg.get("r"), m, cfg.get("L", 1.0))
    return bands.LatticeParams(cfg.get("L"), cfg.get("M"), cfg.get("K"), m)


def _run_bands(cfg: RunConfig, out: Path, plot: bool) -> str:
    lat = _lattice(cfg)
    diag = bands.dispersion(lat, cfg.get("xi_max", 4 * np.pi), cfg.get("samples_per_band", 101))
    b = lat.b
    rows = ((br.index, th / b, x, lat.omega(x)) for br in diag.branches for x, th in zip(br.xi, br.theta))
    write_csv(out / "bands.csv", ["branch", "theta_over_b", "xi", "omega"], rows)
    grows = ((g.index, *lat.omega([g.xi_low, g.xi_high]), lat.omega(g.width)) for g in diag.gaps)
    write_csv(out / "gaps.csv", ["gap_index", "omega_low", "omega_high", "width"], grows)
    if plot:
        def draw(ax):
            for br in diag.branches:
                ax.plot(br.theta / b, lat.omega(br.xi), "k-")
            for g in diag.open_gaps:
                ax.axhspan(*lat.omega([g.xi_low, g.xi_high]), color="0.85")
            ax.set_xlabel("theta / b")
            ax.set_ylabel("omega [rad/s]")

        _plot(out / "bands.svg", draw)
    n_open = len(diag.open_gaps)
    return (
        f"bands={len(diag.bands)}, gaps={len(diag.gaps)}, open={n_open}, closed={len(diag.gaps) - n_open}, "
        f"all_open={n_open == len(diag.gaps)}, max_residual={diag.max_residual():.3g}"
    )


def _bandwidth_job(args):
    mu, r, xi_cut, medium = args
    return bands.total_bandwidth(mu, r, xi_cut, medium)


def _run_band_sweep(cfg: RunConfig, out: Path, plot: bool, jobs: int) -> str:
    mus = cfg.get("mu")
    r, xi_cut, m = cfg.get("r"), cfg.get("xi_cut", 4 * np.pi), cfg.medium
    tasks = [(mu, r, xi_cut, m) for mu in mus]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            widths = list(pool.map(_bandwidth_job, tasks))
    else:
        widths = [_bandwidth_job(t) for t in tasks]
    write_csv(out / "band_sweep.csv", ["mu", "total_bandwidth"], zip(mus, widths))
    order = np.argsort(mus)[::-1]
    w_sorted = np.array(widths)[order]
    increasing = bool(np.all(np.diff(w_sorted) > 0))
    if plot:
        _plot(out / "band_sweep.svg", lambda ax: (ax.plot(mus, widths, "o-"), ax.set_xscale("log"), ax.set_xlabel("mu")))
    return f"points={len(mus)}, bandwidth_increases_as_mu_decreases={increasing}"


def _run_simulate(cfg: RunConfig, out: Path, plot: bool) -> str:
    arr, m = cfg.array(), cfg.medium
    h = cfg.get("h")
    grid = Grid.with_spacing(cfg.get("x_min"), cfg.get("x_max"), h)
    p = cfg.get("p")
    v = cfg.get("v")
    if cfg.get("right_moving", False):
        if p is None:
            raise ConfigError("right_moving needs a pressure profile p")
        v_fun = lambda x: p(x) / m.impedance
    else:
        v_fun = v
    init = timedomain.CharacteristicState.from_functions(grid, arr, m, p=p, v=v_fun)
    stride = cfg.get("snapshot_stride", 0)
    sim = timedomain.Simulator(timedomain.SimConfig(grid, cfg.get("t_end"), snapshot_stride=stride), arr, m)
    ts = sim.run(init)
    rows = (
        (t, j + 1, ts.y[i, j].real, ts.z[i, j].real, ts.sigma[i, j].real, ts.e_ac[i], ts.e_osc[i], ts.e_radiated[i])
        for i, t in enumerate(ts.times)
        for j in range(arr.n)
    )
    write_csv(out / "trajectory.csv", ["t", "j", "y_j", "z_j", "sigma_j", "e_ac", "e_osc", "e_radiated"], rows)
    if stride:
        srows = (
            (t, x, st.p_minus[k].real, st.p_plus[k].real, st.v[k].real)
            for t, st in ts.snapshots
            for k, x in enumerate(grid.x)
        )
        write_csv(out / "snapshots.csv", ["t", "x", "p_left", "p_right", "v"], srows)
    tot = ts.e_total
    drift = float(np.max(np.abs(tot - tot[0])) / tot[0]) if tot[0] > 0 else 0.0
    if plot:
        _plot(out / "trajectory.svg", lambda ax: (ax.plot(ts.times, ts.y.real), ax.set_xlabel("t [s]"), ax.set_ylabel("y_j")))
    return f"steps={len(ts.times) - 1}, energy_drift={drift:.3g}"


def _run_zero_modes(cfg: RunConfig, out: Path, plot: bool) -> str:
    arr, m = cfg.array(), cfg.medium
    modes = krein.zero_mode_basis(arr, m)
    rows = (
        (k + 1, j + 1, arr.s[j], zm.sigma[j].real, zm.y[j].real) for k, zm in enumerate(modes) for j in range(arr.n)
    )
    write_csv(out / "zero_modes.csv", ["mode", "j", "s_j", "sigma_j", "y_j"], rows)
    return f"modes={len(modes)}"


def run_mode(cfg: RunConfig, out: Path, plot: bool = False, jobs: int = 1) -> str:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "band-sweep":
        return _run_band_sweep(cfg, out, plot, jobs)
    runner = {
        "single-wall": _run_single_wall,
        "spectrum": _run_spectrum,
        "bands": _run_bands,
        "simulate": _run_simulate,
        "zero-modes": _run_zero_modes,
    }[cfg.mode]
    return runner(cfg, out, plot)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override or add a config entry (repeatable)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--plot", action="store_true", help="also write SVG plots (needs matplotlib)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for parameter sweeps")
    parser = argparse.ArgumentParser(
        prog="pointacoustics",
        description="Acoustic point interactions in a pipe. Medium defaults: a=343 m/s, rho0=1.21 kg/m^3, S=0.01 m^2.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    helps = {
        "single-wall": "closed-form wall trajectory (keys: M, K, f, g, t_end, samples)",
        "spectrum": "transmission spectrum of a wall array (keys: s, M, K, omega_min, omega_max, n_omega)",
        "bands": "band structure of the periodic lattice (keys: L, M, K or mu, r; xi_max)",
        "band-sweep": "total bandwidth versus mass ratio (keys: repeated mu, r, xi_cut)",
        "simulate": "time-domain simulation (keys: s, M, K, x_min, x_max, h, t_end, p, v)",
        "zero-modes": "static zero-mode basis (keys: s, M, K)",
    }
    for mode in MODES:
        sub.add_parser(mode, parents=[common], help=helps[mode])
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.mode, args.set)
        summary = run_mode(cfg, args.out, args.plot, max(1, args.jobs))
    except NumericalDiagnostic as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
