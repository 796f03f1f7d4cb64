"""Command-line front end.

Every command writes plot-ready CSV/JSON into ``--out`` using file names of
the form ``<scenario>-<kind>.csv|json`` and prints the JSON summary to stdout.
Exit codes: 0 on success, 2 for usage or configuration errors, 1 when a
numerical routine fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, calibration, control, model
from .errors import InvalidConfigurationError, NoEndemicEquilibriumError, PrepctlError
from .integrator import TimeGrid, integrate, nonnegativity_floor
from .presets import PRESET_NAMES, Preset, preset

STEP_ENV = "PREPCTL_STEP"

# flag name -> ModelParams field
PARAM_FLAGS = {
    "lambda": "Lambda", "mu": "mu", "beta": "beta", "eta-c": "eta_C", "eta-a": "eta_A",
    "phi": "phi", "rho": "rho", "alpha": "alpha", "omega": "omega", "d": "d",
    "psi": "psi", "theta": "theta",
}
ALIASES = {"cape-verde": "cape-verde-015", "sicae": "sicae-baseline", "ocp": "ocp-baseline"}
DEFAULT_SCENARIO = {
    "simulate": "cape-verde-015", "equilibria": "cape-verde-015", "stability": "cape-verde-015",
    "calibrate": "cape-verde-015", "ocp": "ocp-baseline", "conjecture-probe": "cape-verde-015",
    "sweep": "ocp-baseline", "presets": None,
}
DEFAULT_STEP = {"simulate": 1e-3, "calibrate": 1e-2, "ocp": 1e-2, "sweep": 1e-2,
                "conjecture-probe": 0.05}


PATH_OPTIONS = {"out", "preset_file", "data"}


class UsageError(Exception):
    pass


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _capacity(text: str) -> float:
    if text.strip().lower() in ("inf", "none", "unbounded"):
        return math.inf
    v = _number(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("vartheta must be > 0")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", "--preset", dest="scenario",
                        help=f"named preset: {', '.join(PRESET_NAMES)}")
    common.add_argument("--preset-file", type=Path, help="preset JSON written by 'presets'")
    common.add_argument("--config", type=Path, help="flat JSON of flag names to values")
    common.add_argument("--out", type=Path, help="artifact directory (default: .)")
    common.add_argument("--name", help="artifact prefix (default: scenario name)")
    common.add_argument("--tf", type=_number, help="horizon in years")
    common.add_argument("--step", type=_number, help=f"integration step (env {STEP_ENV})")
    for flag in PARAM_FLAGS:
        common.add_argument(f"--{flag}", type=_number, metavar="X")

    parser = _Parser(prog="prepctl", description="HIV/AIDS PrEP models: simulation, "
                     "analysis, calibration and optimal control.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="integrate a scenario")
    sub.add_parser("equilibria", parents=[common], help="R0 and equilibria")
    sub.add_parser("stability", parents=[common], help="spectra and beta threshold")

    cal = sub.add_parser("calibrate", parents=[common], help="fit Lambda and/or beta")
    cal.add_argument("--data", type=Path, help="year,cases,population CSV (default: bundled)")
    cal.add_argument("--free", default="Lambda,beta", help="comma-separated subset of Lambda,beta")
    cal.add_argument("--lambda-bounds", type=_number, nargs=2, default=(10000.0, 16000.0))
    cal.add_argument("--beta-bounds", type=_number, nargs=2, default=(0.5, 1.0))

    def ocp_flags(p):
        p.add_argument("--vartheta", type=_capacity, help="PrEP capacity; 'inf' for none")
        p.add_argument("--w1", type=_number)
        p.add_argument("--w2", type=_number)
        p.add_argument("--relaxation", type=_number)
        p.add_argument("--tol", type=_number)
        p.add_argument("--max-sweeps", type=int)

    ocp_flags(sub.add_parser("ocp", parents=[common], help="solve the optimal control problem"))
    sweep = sub.add_parser("sweep", parents=[common], help="concurrent OCP solves over one flag")
    ocp_flags(sweep)
    sweep.add_argument("--param", required=True, help="flag to vary, e.g. vartheta or w2")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--workers", type=int, default=4)

    probe = sub.add_parser("conjecture-probe", parents=[common],
                           help="sample convergence to the d > 0 endemic state")
    probe.add_argument("--samples", type=int)
    probe.add_argument("--seed", type=int)
    probe.add_argument("--tol", type=_number)

    pre = sub.add_parser("presets", parents=[common], help="export presets as JSON")
    pre.add_argument("names", nargs="*", help="presets to export (default: all)")
    return parser


# -- configuration ------------------------------------------------------------

def _apply_config_file(args, parser_dests):
    """Fill flags left unset on the command line from ``--config``."""
    if args.config is None:
        return
    try:
        data = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a flat JSON object")
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in parser_dests or dest in ("config", "command"):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, dest, None) is None:
            if dest == "vartheta" and value is None:
                value = math.inf
            elif dest in PATH_OPTIONS:
                value = Path(value)
            setattr(args, dest, value)


def _scenario(args) -> Preset:
    if args.preset_file is not None:
        try:
            return Preset.from_dict(json.loads(args.preset_file.read_text()))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read preset file {args.preset_file}: {exc}") from None
    name = args.scenario or DEFAULT_SCENARIO[args.command]
    return preset(ALIASES.get(name, name))


def _params(args, pr: Preset) -> model.ModelParams:
    changes = {}
    for flag, field_name in PARAM_FLAGS.items():
        v = getattr(args, flag.replace("-", "_"))
        if v is not None:
            changes[field_name] = float(v)
    p = pr.params.replace(**changes)
    if pr.t0_year is None and "mu" in changes and "Lambda" not in changes:
        # constant-population scenarios keep Lambda = mu * N(0)
        p = p.replace(Lambda=p.mu * sum(pr.initials))
    return p


def _step(args) -> float:
    if args.step is not None:
        return float(args.step)
    env = os.environ.get(STEP_ENV)
    if env:
        try:
            return float(env)
        except ValueError:
            raise UsageError(f"{STEP_ENV}={env!r} is not a number") from None
    return DEFAULT_STEP.get(args.command, 1e-2)


def _outdir(args) -> Path:
    if args.out is None:
        args.out = Path(".")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {args.out}: {exc}") from None
    if not os.access(args.out, os.W_OK):
        raise UsageError(f"output directory {args.out} is not writable")
    return args.out


def _prefix(args, pr):
    return args.name or pr.name


def _write_json(path: Path, data) -> dict:
    path.write_text(json.dumps(data, indent=2, allow_nan=False))
    return data


def _systems(dim):
    if dim == 4:
        return model.rhs_sica, model.dfe_sica, model.endemic_sica, model.r0
    return model.rhs_sicae, model.dfe_sicae, model.endemic_sicae, model.r0_sicae


# -- commands -----------------------------------------------------------------

def cmd_simulate(args):
    pr = _scenario(args)
    p = _params(args, pr)
    out, prefix = _outdir(args), _prefix(args, pr)
    tf = args.tf if args.tf is not None else pr.tf
    step = _step(args)
    rhs = _systems(len(pr.initials))[0]
    grid = TimeGrid(0.0, float(tf), step)
    traj = integrate(lambda t, x: rhs(x, p), pr.initials, grid, floor=nonnegativity_floor(p))
    stride = max(1, round(0.01 / step))
    traj.to_csv(out / f"{prefix}-trajectory.csv", stride=stride)
    summary = {"scenario": pr.name, "tf": tf, "step": step,
               "final_state": dict(zip(traj.labels, map(float, traj.final)))}
    if pr.t0_year is not None and len(pr.initials) == 4:
        data = calibration.load_dataset()
        years = np.arange(pr.t0_year, pr.t0_year + int(round(tf)) + 1)
        series = calibration.simulate_yearly(p, pr.initials, years, step)
        observed = {r.year: r for r in data.records}
        rows = ["year,model_population,model_cases,data_population,data_cases"]
        for y, n, c in zip(series.years, series.population, series.cases):
            r = observed.get(int(y))
            rows.append(f"{int(y)},{float(n)!r},{float(c)!r},{r.population if r else ''},{r.cases if r else ''}")
        (out / f"{prefix}-yearly.csv").write_text("\n".join(rows) + "\n")
        if list(series.years) == list(data.years):
            summary["population_error_percent"] = calibration.error_percent(
                series.population, data.population)
            summary["cases_error_percent"] = calibration.error_percent(series.cases, data.cases)
    return _write_json(out / f"{prefix}-summary.json", summary)


def _endemic_entry(fn, p, rhs):
    try:
        eq = fn(p)
    except NoEndemicEquilibriumError as exc:
        return {"exists": False, "reason": str(exc)}
    return {"exists": True, "state": eq.state.tolist(),
            "residual": model.equilibrium_residual(eq, rhs, p)}


def cmd_equilibria(args):
    pr = _scenario(args)
    p = _params(args, pr)
    out, prefix = _outdir(args), _prefix(args, pr)
    rhs, dfe, endemic, thresh = _systems(len(pr.initials))
    e0 = dfe(p)
    result = {
        "scenario": pr.name,
        "params": p.to_dict(),
        "r0": model.r0(p),
        "threshold": thresh(p),
        "dfe": {"state": e0.state.tolist(), "residual": model.equilibrium_residual(e0, rhs, p)},
        "endemic": _endemic_entry(endemic, p, rhs),
    }
    if len(pr.initials) == 5 and p.d == 0 and p.theta == 0:
        result["r0_reduced"] = model.r0_reduced(p)
        result["endemic_reduced"] = _endemic_entry(
            model.endemic_reduced, p, model.rhs_sicae_mass_action)
    return _write_json(out / f"{prefix}-equilibria.json", result)


def cmd_stability(args):
    pr = _scenario(args)
    p = _params(args, pr)
    out, prefix = _outdir(args), _prefix(args, pr)
    dim = len(pr.initials)
    rhs, dfe, endemic, thresh = _systems(dim)
    f = lambda x: rhs(x, p)  # noqa: E731
    result = {"scenario": pr.name, "threshold": thresh(p),
              "dfe": analysis.local_stability(dfe(p), f).to_dict()}
    try:
        result["endemic"] = analysis.local_stability(endemic(p), f).to_dict()
    except NoEndemicEquilibriumError as exc:
        result["endemic"] = {"exists": False, "reason": str(exc)}
    system = "sica" if dim == 4 else "sicae"
    beta_star = analysis.dfe_spectral_threshold(p, system)
    result["beta_spectral_threshold"] = beta_star
    # threshold is linear in beta, so beta / threshold is the analytic crossing
    result["beta_threshold_from_r0"] = p.beta / thresh(p)
    return _write_json(out / f"{prefix}-stability.json", result)


def cmd_calibrate(args):
    pr = _scenario(args)
    p = _params(args, pr)
    out, prefix = _outdir(args), _prefix(args, pr)
    dataset = calibration.load_dataset(args.data)
    free = tuple(s.strip() for s in args.free.split(",") if s.strip())
    bounds = {"Lambda": tuple(args.lambda_bounds), "beta": tuple(args.beta_bounds)}
    years = dataset.years
    step = _step(args)
    res = calibration.fit(dataset, free, bounds, p, pr.initials, step=step)
    s = calibration.simulate_yearly(res.fitted_params, pr.initials, years, step)
    rows = ["year,model_population,model_cases,data_population,data_cases"]
    for y, n, c, dn, dc in zip(years, s.population, s.cases, dataset.population, dataset.cases):
        rows.append(f"{int(y)},{float(n)!r},{float(c)!r},{int(dn)},{int(dc)}")
    (out / f"{prefix}-fit.csv").write_text("\n".join(rows) + "\n")
    summary = res.to_dict()
    summary["population_error_percent"] = calibration.error_percent(s.population, dataset.population)
    summary["cases_error_percent"] = calibration.error_percent(s.cases, dataset.cases)
    summary["population_error_percent_l2"] = calibration.error_percent(
        s.population, dataset.population, normalize=False)
    summary["cases_error_percent_l2"] = calibration.error_percent(
        s.cases, dataset.cases, normalize=False)
    return _write_json(out / f"{prefix}-calibration.json", summary)


def _ocp_config(args, pr: Preset, **override) -> control.OcpConfig:
    p = _params(args, pr)
    if len(pr.initials) != 5:
        raise InvalidConfigurationError(f"scenario {pr.name} is not a SICAE scenario")
    extras = dict(pr.extras)
    settings = {}
    for key in ("w1", "w2", "vartheta"):
        v = override.get(key, getattr(args, key))
        if v is None:
            v = extras.get(key)
        if v is not None:
            settings[key] = float(v)
    for key in ("relaxation", "tol", "max_sweeps"):
        v = override.get(key, getattr(args, key))
        if v is not None:
            settings[key] = v
    tf = args.tf if args.tf is not None else pr.tf
    return control.OcpConfig(p, grid=TimeGrid(0.0, float(tf), _step(args)),
                             initials=pr.initials, **settings)


def _ocp_summary(sol: control.OcpSolution) -> dict:
    d = sol.diagnostics()
    cfg = sol.config
    d.update({"w1": cfg.w1, "w2": cfg.w2,
              "vartheta": cfg.vartheta if cfg.bounded else None,
              "step": cfg.grid.step, "tf": cfg.grid.tf})
    return d


def cmd_ocp(args):
    pr = _scenario(args)
    cfg = _ocp_config(args, pr)
    out, prefix = _outdir(args), _prefix(args, pr)
    sol = control.fbsm_solve(cfg)
    sol.to_csv(out / f"{prefix}-ocp.csv")
    return _write_json(out / f"{prefix}-ocp.json", _ocp_summary(sol))


def cmd_sweep(args):
    pr = _scenario(args)
    key = args.param.replace("-", "_")
    settable = {"w1", "w2", "vartheta", "relaxation", "tol"}
    if key not in settable:
        raise UsageError(f"--param must be one of {', '.join(sorted(settable))}")
    try:
        values = [_capacity(v) if key == "vartheta" else _number(v)
                  for v in args.values.split(",") if v.strip()]
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    if not values:
        raise UsageError("--values is empty")
    out, prefix = _outdir(args), _prefix(args, pr)
    configs = [_ocp_config(args, pr, **{key: v}) for v in values]

    def solve(cfg, value):
        sol = control.fbsm_solve(cfg)
        tag = "inf" if value == math.inf else f"{value:g}"
        sol.to_csv(out / f"{prefix}-{key}{tag}-ocp.csv")
        return {"value": None if value == math.inf else value, **_ocp_summary(sol)}

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        runs = list(pool.map(solve, configs, values))
    return _write_json(out / f"{prefix}-sweep.json", {"param": key, "runs": runs})


def cmd_conjecture_probe(args):
    pr = _scenario(args)
    p = _params(args, pr)
    if len(pr.initials) != 4:
        raise InvalidConfigurationError("the conjecture probe runs on SICA scenarios")
    out, prefix = _outdir(args), _prefix(args, pr)
    kwargs = {"step": _step(args)}
    if args.tf is not None:
        kwargs["tf"] = float(args.tf)
    if args.samples is not None:
        kwargs["n_samples"] = args.samples
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.tol is not None:
        kwargs["tol"] = float(args.tol)
    return _write_json(out / f"{prefix}-conjecture-probe.json",
                       analysis.conjecture_probe(p, **kwargs))


def cmd_presets(args):
    out = _outdir(args)
    names = [ALIASES.get(n, n) for n in args.names] or list(PRESET_NAMES)
    written = {}
    for name in names:
        pr = preset(name)
        _write_json(out / f"{name}-preset.json", pr.to_dict())
        written[name] = str(out / f"{name}-preset.json")
    return written


COMMANDS = {
    "simulate": cmd_simulate, "equilibria": cmd_equilibria, "stability": cmd_stability,
    "calibrate": cmd_calibrate, "ocp": cmd_ocp, "sweep": cmd_sweep,
    "conjecture-probe": cmd_conjecture_probe, "presets": cmd_presets,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        dests = {a.dest for sp in parser._subparsers._group_actions[0].choices.values()
                 for a in sp._actions}
        _apply_config_file(args, dests)
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"prepctl: error: {exc}", file=sys.stderr)
        return 2
    except InvalidConfigurationError as exc:
        print(f"prepctl: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except PrepctlError as exc:
        print(f"prepctl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2))
    return 0


def main():
    sys.exit(run())
