"""``ftlwave`` command line: one subcommand per computation, CSV/SVG artifacts plus ``manifest.txt``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .config import RunConfig, key_help, load_config
from .errors import (
    AssumptionError,
    ConfigError,
    FrameError,
    FtlError,
    PreconditionError,
    ProblemError,
    UnsupportedError,
)
from .io import fmt, read_csv, sha256, write_csv
from .model import ModelParams, VelocityLaw, conjugate_density, conjugate_left

# failures caused by what was asked for rather than by the numerics
INPUT_ERRORS = (ConfigError, ProblemError, FrameError, AssumptionError, UnsupportedError, PreconditionError)
MAX_MEMBER_ROWS = 400


class Run:
    def __init__(self, command: str, cfg: RunConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.files: list[str] = []
        self.results: list[tuple[str, object]] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def note(self, key: str, value) -> None:
        self.results.append((key, value))

    def write_manifest(self) -> Path:
        lines = [f"ftlwave {__version__}", f"command = {self.command}", "", "[config]"]
        lines += [f"{k} = {v}" for k, v in self.cfg.echo()]
        lines += ["", "[defaults]"]
        lines += [f"{k} = {v}" for k, v in self.cfg.defaults()]
        lines += ["", "[results]"]
        lines += [f"{k} = {fmt(v)}" for k, v in self.results]
        lines += ["", "[files]"]
        lines += [f"{sha256(self.out / name)}  {name}" for name in sorted(set(self.files))]
        path = self.out / "manifest.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def model_params(cfg: RunConfig, ell: Optional[float] = None) -> ModelParams:
    ell = cfg.get("model", "ell") if ell is None else ell
    V = cfg.get("model", "V")
    if cfg.get("model", "law") == "linear":
        return ModelParams(ell, V)
    rho = cfg.require("model", "table_rho")
    phi = cfg.require("model", "table_phi")
    if len(rho) != len(phi):
        raise ConfigError("table_rho and table_phi differ in length")
    return ModelParams(ell, V, VelocityLaw.from_table(rho, phi))


def _density(cfg: RunConfig, name: str) -> Optional[float]:
    value = cfg.get("problem", name)
    if value is not None and not 0.0 <= value <= 1.0:
        raise ConfigError(f"problem.{name} must lie in [0, 1]")
    return value


def boundary_pair(cfg: RunConfig, params: ModelParams) -> tuple[float, float]:
    """``(rho_minus, rho_plus)``; a missing side is the conjugate of the other."""
    rm, rp = _density(cfg, "rho_minus"), _density(cfg, "rho_plus")
    if rp is None and rm is None:
        raise ConfigError("rho_plus required")
    if rp is None:
        rp = conjugate_density(params, rm)
    elif rm is None:
        rm = conjugate_left(params, rp)
    return rm, rp


def bvp_problem(cfg: RunConfig, params: ModelParams):
    from .bvp import BvpProblem

    return BvpProblem(params, *boundary_pair(cfg, params))


def anchors_for(cfg: RunConfig, problem):
    from .bvp import default_anchors

    explicit = cfg.get("solver", "anchors")
    if explicit is not None:
        return explicit
    return default_anchors(problem, cfg.get("solver", "n_anchors"), cfg.get("solver", "anchor_spacing"))


def solve_profile(cfg: RunConfig, problem, *, plateau_tol: Optional[float] = None, keep_curves: bool = False):
    from .bvp import solve_bvp

    tol = cfg.get("solver", "plateau_tol") if plateau_tol is None else plateau_tol
    anchors = None if problem.is_constant or problem.is_step else anchors_for(cfg, problem)
    return solve_bvp(
        problem,
        anchors,
        cfg.get("solver", "delta0"),
        h=cfg.get("solver", "h"),
        bvp_tol=cfg.get("solver", "bvp_tol"),
        plateau_tol=tol,
        keep_curves=keep_curves,
    )


def sample_grid(cfg: RunConfig) -> np.ndarray:
    window = cfg.get("run", "window")
    if len(window) != 2 or not window[1] > window[0]:
        raise ConfigError("run.window needs two increasing numbers")
    return np.linspace(window[0], window[1], cfg.get("run", "n_samples"))


def time_step(cfg: RunConfig, params: ModelParams, save_dt: float) -> tuple[float, int]:
    """Step and steps per save; the default fits a whole number of steps below ``0.1 ell / V`` per save."""
    dt = cfg.get("solver", "dt")
    if dt is None:
        per_save = int(math.ceil(save_dt / (0.1 * params.ell / params.V)))
        return save_dt / per_save, per_save
    return dt, max(int(round(save_dt / dt)), 1)


def _thin(xs: np.ndarray, limit: int = MAX_MEMBER_ROWS) -> np.ndarray:
    stride = max(int(math.ceil(xs.size / limit)), 1)
    picked = xs[::stride]
    return picked if picked[-1] == xs[-1] else np.append(picked, xs[-1])


# subcommands


def cmd_rates(run: Run) -> None:
    from .rates import rate_report, verify_bounds

    cfg = run.cfg
    params = model_params(cfg)
    rp = _density(cfg, "rho_plus")
    if rp is None:
        raise ConfigError("rho_plus required")
    rm = _density(cfg, "rho_minus")
    rm = conjugate_left(params, rp) if rm is None else rm
    rep = rate_report(params, rm, rp)
    check = verify_bounds(rep)
    write_csv(
        run.path("rates.csv"),
        ["rho_minus", "rho_plus", "a", "b", "a_hat", "b_hat", "lambda_plus", "lambda_minus", "bounds_ok"],
        [[rm, rp, *rep.as_row()]],
    )
    run.note("lambda_plus", rep.lambda_plus)
    run.note("lambda_minus", rep.lambda_minus)
    run.note("bounds_ok", check.ok)


def cmd_profile_solve(run: Run) -> None:
    from .profile import RightTail, solve_backward, write_profile_csv
    from .rates import lambda_plus

    cfg = run.cfg
    params = model_params(cfg)
    rp = _density(cfg, "rho_plus")
    if rp is None:
        raise ConfigError("rho_plus required")
    tail = RightTail.from_delta(rp, cfg.get("solver", "delta"), lambda_plus(params, rp), cfg.get("solver", "x_hat"))
    curve, rep = solve_backward(
        params,
        tail,
        h=cfg.get("solver", "h"),
        x_min=cfg.get("solver", "x_min"),
        plateau_tol=cfg.get("solver", "plateau_tol"),
    )
    write_profile_csv(run.path("profile.csv"), curve)
    run.note("plateau", rep.plateau)
    run.note("left_limit", rep.left_limit)
    run.note("x_min", rep.x_min)
    run.note("t_p", rep.t_p)
    run.note("monotone_violations", rep.violations)


def _bvp_single(run: Run, params: ModelParams) -> None:
    from .bvp import write_sequence_csv
    from .profile import write_profile_csv
    from .svg import line_plot

    problem = bvp_problem(run.cfg, params)
    curve, record = solve_profile(run.cfg, problem, keep_curves=True)
    write_sequence_csv(run.path("bvp_sequence.csv"), record)
    if hasattr(curve, "grid"):
        write_profile_csv(run.path("profile.csv"), curve)
    else:
        write_profile_csv(run.path("profile.csv"), curve, sample_grid(run.cfg))
    rows, series = [], []
    for n, member in enumerate(record.curves):
        xs = _thin(member.grid)
        ws = member.sample(xs)
        rows.extend((n, float(x), float(w)) for x, w in zip(xs, ws))
        series.append((f"x_hat={record.x_hat[n]:.3g}", xs, ws))
    if rows:
        write_csv(run.path("bvp_members.csv"), ["n", "x", "W"], rows)
        line_plot(run.path("bvp_overlay.svg"), series, title="approximating sequence", ylabel="W")
    run.note("rho_minus", problem.rho_minus)
    run.note("rho_plus", problem.rho_plus)
    run.note("t_p", problem.t_p)
    run.note("lambda_plus", record.lambda_plus)
    run.note("converged", record.converged)
    if record.rho_minus_n:
        run.note("rho_minus_last", record.rho_minus_n[-1])


def _bvp_batch(run: Run, params: ModelParams, pairs) -> None:
    from .bvp import BvpProblem, measured_slope, slope_equation_root
    from .svg import line_plot

    xs = sample_grid(run.cfg)
    family, rows, series = [], [], []
    linear = params.law.is_linear and params.law.offset == 0.0
    for k, (rm, rp) in enumerate(pairs):
        problem = BvpProblem(params, rm, rp)
        curve, record = solve_profile(run.cfg, problem)
        root = slope_equation_root(problem) if linear else float("nan")
        slope = measured_slope(curve) if hasattr(curve, "grid") else float("nan")
        last = record.rho_minus_n[-1] if record.rho_minus_n else rm
        family.append((rm, rp, problem.f_bar, last, record.converged, root, slope))
        ws = curve.sample(xs)
        rows.extend((k, float(x), float(w)) for x, w in zip(xs, ws))
        series.append((f"({rm:g}, {rp:g})", xs, ws))
    write_csv(
        run.path("bvp_family.csv"),
        ["rho_minus", "rho_plus", "f_bar", "rho_minus_n", "converged", "slope_root", "slope_measured"],
        family,
    )
    write_csv(run.path("family_profiles.csv"), ["k", "x", "W"], rows)
    line_plot(run.path("family_overlay.svg"), series, title="profiles by boundary pair", ylabel="W")
    run.note("pairs", len(pairs))
    run.note("all_converged", all(f[4] for f in family))


def cmd_bvp(run: Run) -> None:
    params = model_params(run.cfg)
    pairs = run.cfg.get("problem", "pairs")
    if pairs:
        _bvp_batch(run, params, pairs)
    else:
        _bvp_single(run, params)


def _profile_platoon(run: Run, params: ModelParams):
    from .simulator import LeaderRule, generate_distribution

    problem = bvp_problem(run.cfg, params)
    curve, _ = solve_profile(run.cfg, problem)
    if not hasattr(curve, "grid"):
        raise UnsupportedError("the step profile generates no platoon")
    cfg = run.cfg
    platoon = generate_distribution(curve, 0.0, cfg.get("run", "n_back"), cfg.get("run", "n_fwd"), leader=LeaderRule.trace(curve))
    return problem, curve, platoon


def cmd_simulate(run: Run) -> None:
    from .simulator import LeaderRule, Platoon, simulate, trace_error, write_cars_csv

    cfg = run.cfg
    params = model_params(cfg)
    if cfg.get("run", "initial") == "uniform":
        rho = cfg.require("run", "rho")
        if rho > 1.0:
            raise ConfigError("run.rho must not exceed 1")
        n = cfg.get("run", "n_back") + cfg.get("run", "n_fwd") + 1
        platoon = Platoon(np.arange(n) * params.ell / rho, params, LeaderRule.constant(rho))
        fbar = float(params.flux(rho))
        curve = None
    else:
        problem, curve, platoon = _profile_platoon(run, params)
        fbar = problem.f_bar
    if not fbar > 0.0:
        raise ConfigError("the platoon carries no flux; there is no period to scale the run")
    t_p = params.ell / fbar
    dt, per_save = time_step(cfg, params, t_p / cfg.get("run", "saves_per_period"))
    steps = int(round(cfg.get("run", "n_periods") * t_p / dt))
    traj = simulate(platoon, dt, steps * dt, stride=per_save)
    write_cars_csv(run.path("cars.csv"), traj)
    run.note("cars", platoon.n)
    run.note("t_p", t_p)
    run.note("dt", dt)
    if curve is not None:
        run.note("trace_error", trace_error(traj, curve))
    else:
        run.note("density_drift", float(np.max(np.abs(traj.densities - traj.densities[0]))))


def cmd_periodicity(run: Run) -> None:
    from .diagnostics import covering_platoon
    from .simulator import measure_period, simulate

    cfg = run.cfg
    params = model_params(cfg)
    problem = bvp_problem(cfg, params)
    curve, _ = solve_profile(cfg, problem)
    if not hasattr(curve, "grid"):
        raise UnsupportedError("the step profile generates no platoon")
    platoon = covering_platoon(curve, extra_back=5)
    t_p = problem.t_p
    dt, _ = time_step(cfg, params, t_p / 200)
    traj = simulate(platoon, dt, int(math.ceil(1.5 * t_p / dt)) * dt)
    rep = measure_period(traj, curve)
    write_csv(run.path("periods.csv"), ["i", "t_event", "t_quadrature"], zip(range(rep.event_times.size), rep.event_times, rep.quadrature_times))
    run.note("t_p", t_p)
    run.note("mean", rep.mean)
    run.note("relative_error", rep.mean / t_p - 1.0)
    run.note("relative_spread", rep.relative_spread)


def cmd_stability(run: Run) -> None:
    from .diagnostics import STABILITY_PLATEAU_TOL, Perturbation, stability_run, write_envelopes_csv

    cfg = run.cfg
    params = model_params(cfg)
    problem = bvp_problem(cfg, params)
    # cars born on the plateau must sit well below the margin, so solve further out unless told otherwise
    tol = None if ("solver", "plateau_tol") in cfg.raw else STABILITY_PLATEAU_TOL
    curve, _ = solve_profile(cfg, problem, plateau_tol=tol)
    pert = Perturbation(cfg.get("run", "amplitude"), cfg.get("run", "pattern"), cfg.get("run", "seed"))
    trace = stability_run(
        problem,
        curve,
        pert,
        dt=cfg.get("solver", "dt"),
        n_periods=cfg.get("run", "stability_periods"),
        saves_per_period=cfg.get("run", "saves_per_period"),
        margin=cfg.get("run", "margin"),
    )
    write_envelopes_csv(run.path("envelopes.csv"), trace)
    run.note("gap_start", float(trace.gap[0]))
    run.note("gap_end", float(trace.gap[-1]))
    run.note("reduction", trace.reduction)
    run.note("non_increasing", trace.non_increasing())
    run.note("increase_fraction", trace.increase_fraction())


def cmd_compare_macro(run: Run) -> None:
    from .macro import compare_profile, write_compare_csv

    cfg = run.cfg
    params = model_params(cfg)
    problem = bvp_problem(cfg, params)
    xs = sample_grid(cfg)
    window = (float(xs[0]), float(xs[-1]))
    eps = cfg.get("macro", "epsilon")
    curve, _ = solve_profile(cfg, problem)
    write_compare_csv(run.path("compare.csv"), curve, problem.rho_minus, problem.rho_plus, xs, eps)
    cmp = compare_profile(curve, problem.rho_minus, problem.rho_plus, window, eps)
    run.note("l1_step", cmp.l1_step)
    run.note("sup_viscous", cmp.sup_viscous)
    run.note("sup_continuum2", cmp.sup_continuum2)
    ells = cfg.get("macro", "ells")
    if ells:
        rows = []
        for ell in ells:
            p = model_params(cfg, ell)
            prob = type(problem)(p, problem.rho_minus, problem.rho_plus)
            c, _ = solve_profile(cfg, prob)
            m = compare_profile(c, prob.rho_minus, prob.rho_plus, window, None if eps is None else eps * ell / params.ell)
            rows.append((ell, m.l1_step, m.sup_viscous, m.sup_continuum2))
        write_csv(run.path("compare_sweep.csv"), ["ell", "l1_step", "sup_viscous", "sup_continuum2"], rows)


def cmd_moving_frame(run: Run) -> None:
    from .macro import jump_speed
    from .moving import FrameSpec, shift_problem, verify_traveling
    from .profile import write_profile_csv

    cfg = run.cfg
    params = model_params(cfg)
    sigma = cfg.get("run", "sigma")
    frame = FrameSpec(params, sigma)
    rm, rp = boundary_pair(cfg, frame.frame_params)
    problem = shift_problem(params, sigma, rm, rp)
    curve, record = solve_profile(cfg, problem)
    if not hasattr(curve, "grid"):
        raise UnsupportedError("the step profile has no trace to verify")
    report = verify_traveling(
        curve,
        params,
        sigma,
        n_periods=cfg.get("run", "n_periods"),
        dt=cfg.get("solver", "dt"),
        probe_sigma=cfg.get("run", "probe_sigma"),
        saves_per_period=cfg.get("run", "saves_per_period"),
    )
    write_profile_csv(run.path("profile.csv"), curve)
    write_csv(run.path("trace.csv"), ["t", "error"], zip(report.times, report.errors))
    run.note("sigma", sigma)
    run.note("probe_sigma", report.probe_sigma)
    run.note("rho_minus", rm)
    run.note("rho_plus", rp)
    run.note("lab_jump_speed", jump_speed(params, rm, rp))
    run.note("wave_speed", frame.speed)
    run.note("converged", record.converged)
    run.note("max_trace_error", report.max_error)


def _columns(path: Path) -> dict[str, np.ndarray]:
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def _grouped(cols: dict[str, np.ndarray], key: str, label: Callable[[int], str]):
    out = []
    for k in np.unique(cols[key]):
        sel = cols[key] == k
        out.append((label(int(k)), cols["x"][sel], cols["W"][sel]))
    return out


def cmd_figures(run: Run) -> None:
    from .svg import line_plot

    out = run.out
    made = 0

    def have(name: str) -> Optional[dict[str, np.ndarray]]:
        p = out / name
        if not p.exists():
            return None
        run.files.append(name)
        return _columns(p)

    if (c := have("profile.csv")) is not None:
        line_plot(run.path("profile.svg"), [("W", c["x"], c["W"])], title="profile", ylabel="W")
        made += 1
    if (c := have("bvp_sequence.csv")) is not None:
        line_plot(run.path("bvp_sequence.svg"), [("rho_minus_n", c["x_hat"], c["rho_minus_n"])], title="left limits", xlabel="x_hat")
        made += 1
    if (c := have("bvp_members.csv")) is not None:
        line_plot(run.path("bvp_overlay.svg"), _grouped(c, "n", lambda k: f"n={k}"), title="approximating sequence", ylabel="W")
        made += 1
    if (c := have("family_profiles.csv")) is not None:
        line_plot(run.path("family_overlay.svg"), _grouped(c, "k", lambda k: f"pair {k}"), title="profiles by boundary pair", ylabel="W")
        made += 1
    if (c := have("envelopes.csv")) is not None:
        line_plot(
            run.path("envelopes.svg"),
            [("h_plus", c["t"], c["h_plus"]), ("h_minus", c["t"], c["h_minus"]), ("gap", c["t"], c["gap"])],
            title="envelope shifts",
            xlabel="t",
        )
        made += 1
    if (c := have("compare.csv")) is not None:
        names = ("W_dde", "W_viscous", "W_continuum2", "W_step")
        line_plot(run.path("compare.svg"), [(n, c["x"], c[n]) for n in names], title="micro and macro profiles", ylabel="W")
        made += 1
    if (c := have("trace.csv")) is not None:
        line_plot(run.path("trace.svg"), [("error", c["t"], c["error"])], title="trace error", xlabel="t")
        made += 1
    if (c := have("cars.csv")) is not None:
        cars = np.unique(c["i"])
        pick = cars[:: max(cars.size // 10, 1)]
        series = [(f"car {int(i)}", c["t"][c["i"] == i], c["z"][c["i"] == i]) for i in pick]
        line_plot(run.path("cars.svg"), series, title="trajectories", xlabel="t", ylabel="z")
        made += 1
    if not made:
        raise ConfigError(f"no known CSV files in {out}")
    run.note("figures", made)


COMMANDS: dict[str, Callable[[Run], None]] = {
    "rates": cmd_rates,
    "profile-solve": cmd_profile_solve,
    "bvp": cmd_bvp,
    "simulate": cmd_simulate,
    "periodicity": cmd_periodicity,
    "stability": cmd_stability,
    "compare-macro": cmd_compare_macro,
    "moving-frame": cmd_moving_frame,
    "figures": cmd_figures,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"usage: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="ftlwave",
        description="Traveling-wave profiles of follow-the-leader traffic.",
        epilog="subcommands: " + ", ".join(COMMANDS) + "\n\nconfig keys:\n" + key_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", help="subcommand to run")
    p.add_argument("--config", help="INI file with [model], [problem], [solver], [run], [macro] sections")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one key (repeatable)")
    p.add_argument("--out", default="out", help="output directory (default ./out)")
    return p


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS.get(args.command)
    if handler is None:
        print(f"usage: unknown subcommand {args.command}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.set)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        run = Run(args.command, cfg, out)
        handler(run)
        run.write_manifest()
    except INPUT_ERRORS as exc:
        print(f"config: {_one_line(exc)}", file=sys.stderr)
        return 2
    except FtlError as exc:
        print(f"numerical: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    for key, value in run.results:
        print(f"{key} = {fmt(value)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
