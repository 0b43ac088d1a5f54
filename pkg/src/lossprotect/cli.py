"""Command line front-end.

Subcommands: simulate, markovian, memory, sweep, boundaries.
Exit codes: 0 success, 2 usage/config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from lossprotect import __version__, dynamics, markovian, memory as memory_mod, phase
from lossprotect.model import IndexConvention, SystemParams, basis_state, build_hamiltonian, effective_gamma, revival_time

log = logging.getLogger("lossprotect")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

PARAM_KEYS = ("omega0", "delta_omega", "g", "Omega", "n_modes", "index_convention")

# caption parameters, omega0 = 1
PRESETS: dict[str, dict[str, Any]] = {
    "fig1": {"n_modes": 100, "delta_omega": 2e-3, "g": 3e-3, "Omega": 6e-3},
    "fig2": {"n_modes": 100, "delta_omega": 2e-3, "g": 7.5e-4, "Omega": 5e-4},
    "fig3": {"n_modes": 50, "delta_omega": 2e-3},
    "fig4-analytic": {"n_modes": 50, "delta_omega": 2e-3},
}
SWEEP_PRESETS = ("fig3", "fig4-analytic")
SIM_PRESETS = ("fig1", "fig2")


class ConfigError(ValueError):
    pass


class UsageParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common_parser() -> argparse.ArgumentParser:
    common = UsageParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", type=Path, help="JSON file of parameters/options (unknown keys rejected)")
    g.add_argument("--out", type=Path, help="output directory (default: current directory)")
    g.add_argument("--threads", type=int, help="worker processes for sweeps (default: available cores)")
    g.add_argument("--rotating-frame", dest="rotating_frame", type=_bool, help="subtract omega0 from the diagonal (default true)")
    g.add_argument("--convention", dest="index_convention", choices=["as-written", "symmetric"])
    p = common.add_argument_group("system parameters (units of omega0)")
    p.add_argument("--omega0", type=float)
    p.add_argument("--delta-omega", "--delta_omega", dest="delta_omega", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--Omega", type=float)
    p.add_argument("--n-modes", "--n_modes", dest="n_modes", type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = UsageParser(prog="lossprotect", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    sim = sub.add_parser("simulate", parents=[common], help="trajectory of the full model")
    sim.add_argument("--preset", choices=SIM_PRESETS)
    sim.add_argument("--t-end", dest="t_end", type=float, help="end time in 1/omega0")
    sim.add_argument("--t-end-revivals", dest="t_end_revivals", type=float, help="end time in revival times (default 2.5)")
    sim.add_argument("--n-times", dest="n_times", type=int, help="number of samples in [0, t_end] (default 5001)")
    sim.add_argument("--init", default=None, help="a1, a2 or a JSON file holding [[re, im], ...]")
    sim.add_argument("--markovian", dest="with_markovian", type=_bool, help="also write the 2x2 trajectory (default true)")

    mk = sub.add_parser("markovian", parents=[common], help="eigenstructure of the 2x2 reduction")
    mk.add_argument("--preset", choices=SIM_PRESETS)
    mk.add_argument("--gamma", type=float, help="decay rate; otherwise pi g^2 / delta_omega")

    mem = sub.add_parser("memory", parents=[common], help="memory M of an initial state")
    mem.add_argument("--preset", choices=SIM_PRESETS)
    mem.add_argument("--init", default=None, help="a1, a2 or a JSON file holding [[re, im], ...]")
    mem.add_argument("--tau", type=float, help="window start in 1/omega0 (default 5 T_R)")
    mem.add_argument("--T", dest="T", type=float, help="window length in 1/omega0 (default 20 T_R)")
    mem.add_argument("--n-samples", dest="n_samples", type=int)

    sw = sub.add_parser("sweep", parents=[common], help="(g, Omega) phase diagram")
    sw.add_argument("--preset", choices=SWEEP_PRESETS)
    sw.add_argument("--g-range", dest="g_range", type=float, nargs=3, metavar=("START", "STOP", "NUM"),
                    help="g axis in units of delta_omega (default 0.1 3 20)")
    sw.add_argument("--Omega-range", dest="Omega_range", type=float, nargs=3, metavar=("START", "STOP", "NUM"),
                    help="Omega axis in units of delta_omega (default 0.1 3 20)")
    sw.add_argument("--threshold", type=float)
    sw.add_argument("--tau-revivals", dest="tau_revivals", type=float)
    sw.add_argument("--window-revivals", dest="window_revivals", type=float)
    sw.add_argument("--n-samples", dest="n_samples", type=int)
    sw.add_argument("--analytic-only", dest="analytic_only", type=_bool)

    sub.add_parser("boundaries", parents=[common], help="analytic protection predicates at one point")
    return parser


# option keys accepted in a config file, per subcommand
OPTION_KEYS = {
    "simulate": {"t_end", "t_end_revivals", "n_times", "init", "with_markovian"},
    "markovian": {"gamma"},
    "memory": {"init", "tau", "T", "n_samples"},
    "sweep": {"g_range", "Omega_range", "threshold", "tau_revivals", "window_revivals", "n_samples", "analytic_only"},
    "boundaries": set(),
}
GLOBAL_KEYS = {"out", "threads", "rotating_frame", "preset"}


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge preset < config file < explicit flags into one validated dict."""
    cfg: dict[str, Any] = {}
    preset = getattr(args, "preset", None)
    file_cfg: dict[str, Any] = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        allowed = set(PARAM_KEYS) | GLOBAL_KEYS | OPTION_KEYS[args.command]
        unknown = set(file_cfg) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        preset = file_cfg.get("preset", preset) if preset is None else preset
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        cfg.update(PRESETS[preset])
    cfg.update({k: v for k, v in file_cfg.items() if k != "preset"})
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose", "preset") or value is None:
            continue
        cfg[key] = value
    cfg["preset"] = preset
    return cfg


def params_from(cfg: dict[str, Any], require_couplings: bool = True) -> SystemParams:
    data = {k: cfg[k] for k in PARAM_KEYS if k in cfg}
    data.setdefault("index_convention", IndexConvention.AS_WRITTEN)
    if not require_couplings:
        data.setdefault("g", 0.0)
        data.setdefault("Omega", 0.0)
    missing = [k for k in ("delta_omega", "g", "Omega", "n_modes") if k not in data]
    if missing:
        raise ConfigError(f"missing parameters: {missing}")
    try:
        return SystemParams(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def initial_state(spec: str | None, params: SystemParams) -> np.ndarray:
    if spec is None or spec == "a1":
        return basis_state(params, 0)
    if spec == "a2":
        return basis_state(params, 1)
    try:
        raw = json.loads(Path(spec).read_text())
        psi = np.array([complex(re, im) for re, im in raw], dtype=complex)
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read initial state {spec!r}: {exc}") from exc
    if psi.shape != (params.dim,):
        raise ConfigError(f"initial state has {psi.size} amplitudes, expected {params.dim}")
    return psi


def _out_dir(cfg: dict[str, Any]) -> Path:
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def run_simulate(cfg: dict[str, Any]) -> int:
    params = params_from(cfg)
    rotating = cfg.get("rotating_frame", True)
    t_r = revival_time(params)
    t_end = cfg.get("t_end")
    if t_end is None:
        t_end = cfg.get("t_end_revivals", 2.5) * t_r
    n_times = int(cfg.get("n_times", 5001))
    if n_times < 1 or not t_end > 0 and n_times > 1:
        raise ConfigError("time grid is empty: need n_times >= 1 and t_end > 0")
    times = np.linspace(0.0, t_end, n_times)
    psi0 = initial_state(cfg.get("init"), params)

    decomp = dynamics.diagonalize(build_hamiltonian(params, rotating_frame=rotating))
    traj = dynamics.propagate_series(decomp, psi0, times)
    out = _out_dir(cfg)
    traj.write_csv(out / "trajectory.csv")
    files = ["trajectory.csv"]

    with_mk = cfg.get("with_markovian", True)
    if with_mk:
        model = markovian.MarkovianModel(effective_gamma(params), params.Omega, 0.0 if rotating else params.omega0)
        rows = markovian.markovian_series(model, psi0[:2], times)
        with open(out / "markovian.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "re_a1", "im_a1", "abs2_a1", "re_a2", "im_a2", "abs2_a2"))
            for t, (a1, a2) in zip(times, rows):
                vals = (t, a1.real, a1.imag, abs(a1) ** 2, a2.real, a2.imag, abs(a2) ** 2)
                w.writerow([f"{v:.17g}" for v in vals])
        files.append("markovian.csv")

    (out / "simulate.gp").write_text(_simulate_plot_script(t_r, with_mk, cfg.get("preset")))
    files.append("simulate.gp")
    meta = {
        "command": "simulate",
        "preset": cfg.get("preset"),
        "params": params.to_dict(),
        "rotating_frame": rotating,
        "revival_time": t_r,
        "gamma": effective_gamma(params),
        "t_end": float(t_end),
        "n_times": n_times,
        "max_norm_drift": float(np.max(np.abs(traj.norms2() - dynamics.norm2(psi0)))),
        "files": files,
    }
    _write_json(out / "simulate.json", meta)
    log.info("wrote %s", ", ".join(files))
    return EXIT_OK


def _simulate_plot_script(t_r: float, with_mk: bool, preset: str | None) -> str:
    title = f"|a_{{1,2}}(t)|^2{' (' + preset + ')' if preset else ''}"
    lines = [
        "# gnuplot script: full model (solid) vs Markovian reduction (dashed)",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"TR = {t_r:.17g}",
        f"set title '{title}'",
        "set xlabel 't / T_R'",
        "set ylabel '|a|^2'",
        "set arrow from 1, graph 0 to 1, graph 1 nohead dashtype 3 lc rgb 'gray'",
        "set terminal pngcairo size 900,500",
        "set output 'simulate.png'",
    ]
    plot = [
        "'trajectory.csv' using ($1/TR):4 with lines lw 2 lc rgb 'blue' title '|a_1|^2'",
        "'' using ($1/TR):7 with lines lw 2 lc rgb 'red' title '|a_2|^2'",
    ]
    if with_mk:
        plot += [
            "'markovian.csv' using ($1/TR):4 with lines dt 2 lc rgb 'black' title 'Markov |a_1|^2'",
            "'' using ($1/TR):7 with lines dt 2 lc rgb 'black' notitle",
        ]
    lines.append("plot " + ", \\\n     ".join(plot))
    return "\n".join(lines) + "\n"


def run_markovian(cfg: dict[str, Any]) -> dict[str, Any]:
    omega0 = cfg.get("omega0", 1.0)
    if cfg.get("gamma") is not None:
        gamma = cfg["gamma"]
    else:
        if cfg.get("g") is None or cfg.get("delta_omega") is None:
            raise ConfigError("markovian needs --gamma or both --g and --delta-omega")
        if cfg["delta_omega"] <= 0 or cfg["g"] < 0:
            raise ConfigError("need delta_omega > 0 and g >= 0")
        gamma = math.pi * cfg["g"] ** 2 / cfg["delta_omega"]
    if "Omega" not in cfg:
        raise ConfigError("markovian needs --Omega")
    try:
        model = markovian.MarkovianModel(gamma, cfg["Omega"], omega0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = markovian.report(model)
    result["preset"] = cfg.get("preset")
    return result


def run_memory(cfg: dict[str, Any]) -> dict[str, Any]:
    params = params_from(cfg)
    psi0 = initial_state(cfg.get("init"), params)
    try:
        est = memory_mod.memory(
            params,
            psi0,
            tau=cfg.get("tau"),
            T=cfg.get("T"),
            n_samples=cfg.get("n_samples", memory_mod.DEFAULT_SAMPLES),
            rotating_frame=cfg.get("rotating_frame", True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = est.to_dict()
    result.update(params=params.to_dict(), init=cfg.get("init") or "a1", preset=cfg.get("preset"))
    return result


def _axis(spec, delta_omega: float, name: str) -> np.ndarray:
    start, stop, num = spec
    if int(num) != num or num < 1:
        raise ConfigError(f"{name} range needs an integer count >= 1")
    if int(num) > 1 and not stop > start:
        raise ConfigError(f"{name} range must be increasing")
    return np.linspace(start, stop, int(num)) * delta_omega


def run_sweep(cfg: dict[str, Any]) -> int:
    params = params_from(cfg, require_couplings=False)
    dw = params.delta_omega
    g_axis = _axis(cfg.get("g_range", (0.1, 3.0, 20)), dw, "g")
    om_axis = _axis(cfg.get("Omega_range", (0.1, 3.0, 20)), dw, "Omega")
    analytic_only = bool(cfg.get("analytic_only", False)) or cfg.get("preset") == "fig4-analytic"
    threshold = cfg.get("threshold", phase.DEFAULT_THRESHOLD)
    settings = memory_mod.MemorySettings(
        tau_revivals=cfg.get("tau_revivals", memory_mod.DEFAULT_TAU_REVIVALS),
        window_revivals=cfg.get("window_revivals", memory_mod.DEFAULT_WINDOW_REVIVALS),
        n_samples=cfg.get("n_samples", memory_mod.DEFAULT_SAMPLES),
        rotating_frame=cfg.get("rotating_frame", True),
    )
    workers = cfg.get("threads") or phase.default_workers()
    if workers < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        diagram = phase.sweep(
            g_axis, om_axis, params.n_modes, dw, threshold, settings, params.index_convention,
            workers=workers, numeric=not analytic_only,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    diagram.extra_metadata.update(
        version=__version__,
        preset=cfg.get("preset"),
        preset_params=PRESETS.get(cfg.get("preset") or "", None),
        g_range_in_delta_omega=list(cfg.get("g_range", (0.1, 3.0, 20))),
        Omega_range_in_delta_omega=list(cfg.get("Omega_range", (0.1, 3.0, 20))),
        analytic_only=analytic_only,
    )
    if not analytic_only:
        agreement, kept = phase.agreement_outside_band(diagram)
        diagram.extra_metadata.update(agreement_outside_band=agreement, cells_outside_band=kept)

    out = _out_dir(cfg)
    diagram.write_csv(out / "diagram.csv")
    diagram.write_metadata(out / "diagram.json")
    diagram.write_matrix(out / "analytic_verdict.dat", diagram.verdict_grid(analytic=True))
    if not analytic_only:
        diagram.write_matrix(out / "verdict.dat", diagram.verdict_grid())
        diagram.write_matrix(out / "M_state1.dat", diagram.memory_grid(1))
        diagram.write_matrix(out / "M_state2.dat", diagram.memory_grid(2))
    (out / "sweep.gp").write_text(_sweep_plot_script(dw, analytic_only))

    for c in diagram.iter_cells():
        if c.error:
            log.warning("cell g=%.6g Omega=%.6g failed: %s", c.g, c.Omega, c.error)
    if not analytic_only and diagram.invalid_fraction() > 0.1:
        log.error("%.0f%% of cells invalid", 100 * diagram.invalid_fraction())
        return EXIT_RUNTIME
    return EXIT_OK


def _sweep_plot_script(dw: float, analytic_only: bool) -> str:
    panels = ["analytic_verdict.dat"] if analytic_only else ["M_state1.dat", "M_state2.dat", "verdict.dat", "analytic_verdict.dat"]
    lines = [
        "# gnuplot script: heatmaps with the two reference lines",
        f"DW = {dw:.17g}",
        "set xlabel 'g / delta_omega'",
        "set ylabel 'Omega / delta_omega'",
        "set terminal pngcairo size 800,650",
        "set xrange [*:*]; set yrange [*:*]",
        # vertical line gamma = delta_omega, inclined line Omega = sqrt(pi/2) g
        "set arrow 1 from 1/sqrt(pi), graph 0 to 1/sqrt(pi), graph 1 nohead lc rgb 'red' lw 2",
        "set arrow 2 from sqrt(2/pi), graph 0 to sqrt(2/pi), graph 1 nohead lc rgb 'red' dt 2",
        "f(x) = sqrt(pi/2) * x",
    ]
    for name in panels:
        stem = name[:-4]
        lines += [
            f"set output '{stem}.png'",
            f"set title '{stem}'",
            f"plot '{name}' nonuniform matrix using ($1/DW):($2/DW):3 with image notitle, f(x) lc rgb 'red' lw 2 notitle",
        ]
    return "\n".join(lines) + "\n"


def run_boundaries(cfg: dict[str, Any]) -> dict[str, Any]:
    for key in ("g", "Omega", "delta_omega"):
        if cfg.get(key) is None:
            raise ConfigError(f"boundaries needs --{key.replace('_', '-')}")
    try:
        b = phase.protection_boundaries(cfg["g"], cfg["Omega"], cfg["delta_omega"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    model = markovian.MarkovianModel(math.pi * cfg["g"] ** 2 / cfg["delta_omega"], cfg["Omega"])
    slow, fast = markovian.relaxation_rates(model)
    result = b.to_dict()
    result.update(
        analytic_verdict=phase.analytic_classification(cfg["g"], cfg["Omega"], cfg["delta_omega"]).verdict.value,
        Omega_EP=phase.omega_ep(cfg["g"], cfg["delta_omega"]),
        n_excited_slow=phase.n_excited(slow, cfg["delta_omega"]),
        n_excited_fast=phase.n_excited(fast, cfg["delta_omega"]),
    )
    return result


def _emit(cfg: dict[str, Any], name: str, data: dict[str, Any]) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    print(text)
    if cfg.get("out") is not None:
        (_out_dir(cfg) / f"{name}.json").write_text(text + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"lossprotect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        if args.command == "simulate":
            return run_simulate(cfg)
        if args.command == "sweep":
            return run_sweep(cfg)
        runners = {"markovian": run_markovian, "memory": run_memory, "boundaries": run_boundaries}
        _emit(cfg, args.command, runners[args.command](cfg))
        return EXIT_OK
    except ConfigError as exc:
        print(f"lossprotect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.exception("runtime failure")
        print(f"lossprotect: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
