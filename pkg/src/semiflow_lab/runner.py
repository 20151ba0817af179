"""Command execution: every CLI verb maps to one deterministic run.

Each command consumes a validated RunConfig, delegates to the core modules,
and produces a CommandResult holding the exit code, a summary dictionary,
and the rendered output files. Nothing here touches the filesystem except
`write_outputs`; callers decide where (and whether) files land on disk.

Output files, all rendered with fixed 17-significant-digit float formatting
so identical configs produce byte-identical bytes:

  - summary.json     scalar results and verdicts (every command)
  - trajectory.csv   t, lambda, I, J, int_s, L, V, slack (simulate, lyapunov)
  - spectrum.csv     contour samples and running winding (spectrum)
  - sweep.csv        one row per swept value (sweep, extinction)

Exit codes: 0 on success, 2 when the command ran but a monitored property
failed (non-monotone functional, unstable root count, non-converged fit,
failed sweep row), errors raise and are rendered by the caller as exit 1.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .calibrate import edmunds_reference, fit_exponential, load_samples
from .config import RunConfig
from .errors import ConfigError, ParameterDomainError
from .lyapunov import monitor
from .model import (
    InfectionAgeState,
    SystemState,
    basic_reproduction_number,
    cell_averaged_exponential,
    disease_free_equilibrium,
    endemic_equilibrium,
    make_grid,
    state_norm,
)
from .simulate import SimConfig, dissipativity_check, simulate, simulate_infection_age
from .spectral import (
    contour_scan,
    count_unstable_roots,
    imaginary_axis_margin,
    lyapunov_condition,
    make_context,
    root_bound,
)
from .sweep import extinction_sweep, make_initial_states, perturbation_sweep

__all__ = ["COMMANDS", "CommandResult", "run_command", "write_outputs"]

COMMANDS = (
    "r0",
    "equilibria",
    "simulate",
    "crosscheck",
    "spectrum",
    "lyapunov",
    "fit",
    "sweep",
    "extinction",
)

DISSIPATIVITY_TOL_SCALE = 1e-4
CROSSCHECK_RATIO_TARGET = 2.0
CROSSCHECK_RATIO_SLACK = 0.3


@dataclass(frozen=True)
class CommandResult:
    """Outcome of one command: exit code, summary scalars, rendered files."""

    command: str
    exit_code: int
    summary: dict
    files: dict[str, str]


# ---------------------------------------------------------------------------
# deterministic rendering
# ---------------------------------------------------------------------------

def format_float(value: float) -> str:
    """Fixed 17-significant-digit rendering; non-finite values spelled out."""
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_render(obj, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return format_float(x)
        return json.dumps(format_float(x))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        body = ",\n".join(inner + _json_render(v, indent + 1) for v in obj)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(
            inner + json.dumps(str(k)) + ": " + _json_render(obj[k], indent + 1)
            for k in sorted(obj)
        )
        return "{\n" + body + "\n" + pad + "}"
    raise TypeError(f"cannot render {type(obj).__name__} deterministically")


def render_json(obj: dict) -> str:
    """Render a summary dictionary with sorted keys and a trailing newline."""
    return _json_render(obj, 0) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def render_csv(header: list[str], rows: list[list]) -> str:
    """RFC-4180-style CSV: CRLF line endings, mandatory header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def write_outputs(result: CommandResult, out_dir) -> list[str]:
    """Write every rendered file under out_dir; returns the paths written."""
    from pathlib import Path

    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(result.files):
        path = base / name
        path.write_text(result.files[name], newline="")
        written.append(str(path))
    return written


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def _initial_state(cfg: RunConfig) -> SystemState:
    """Initial state from the configured launch point.

    `start = disease_free` scales the infection-free density by s_scale and
    seeds the absolute counts (seed_i, seed_j). `start = endemic` (valid
    only above threshold) scales the endemic density by s_scale and treats
    the seeds as multipliers of the equilibrium counts, which is the natural
    way to launch controlled perturbations of the endemic state.
    """
    if cfg.start == "endemic":
        eq = endemic_equilibrium(cfg.params, cfg.profile, cfg.grid)
        return SystemState(
            s=cfg.s_scale * eq.s,
            big_i=cfg.seed_i * eq.big_i,
            big_j=cfg.seed_j * eq.big_j,
            time=0.0,
        )
    base = disease_free_equilibrium(cfg.params, cfg.grid)
    return SystemState(
        s=cfg.s_scale * base.s,
        big_i=cfg.seed_i,
        big_j=cfg.seed_j,
        time=0.0,
    )


def _sim_config(cfg: RunConfig, track_endemic=False, v_reference=None) -> SimConfig:
    return SimConfig(
        dt=cfg.grid.da,
        horizon=cfg.horizon,
        output_stride=cfg.output_stride,
        track_endemic=track_endemic,
        v_reference=v_reference,
    )


def _endemic_scalars(cfg: RunConfig) -> dict:
    """Top-level lambda_E / I_E / J_E, null below threshold."""
    r0 = basic_reproduction_number(cfg.params, cfg.profile)
    if r0 > 1.0:
        eq = endemic_equilibrium(cfg.params, cfg.profile, cfg.grid)
        return {"R0": r0, "lambda_E": eq.force, "I_E": eq.big_i, "J_E": eq.big_j}
    return {"R0": r0, "lambda_E": None, "I_E": None, "J_E": None}


def _trajectory_csv(traj, cfg: RunConfig) -> str:
    """Snapshot rows with per-step functional slack aggregated per interval.

    L is the extinction functional, V the endemic one (empty when the run
    did not track it). `slack` is the most adverse per-step decrement of
    the tracked functional (V when present, else L) since the previous row;
    the first row has no preceding interval and carries an empty cell.
    """
    h = cfg.grid.da
    stride = traj.snapshot_stride_steps
    extinction = traj.monitors["extinction"]
    endemic = traj.monitors.get("endemic")
    watched = endemic if endemic is not None else extinction
    rows = []
    for k, snap in enumerate(traj.states):
        idx = k * stride
        lam = cfg.params.beta_I * snap.big_i + cfg.params.beta_J * snap.big_j
        mass = float(np.sum(snap.s)) * h
        if k == 0:
            slack = None
        else:
            window = watched[(k - 1) * stride : idx + 1]
            slack = float(np.min(window[:-1] - window[1:]))
        rows.append(
            [
                snap.time,
                lam,
                snap.big_i,
                snap.big_j,
                mass,
                extinction[idx],
                endemic[idx] if endemic is not None else None,
                slack,
            ]
        )
    return render_csv(["t", "lambda", "I", "J", "int_s", "L", "V", "slack"], rows)


def _sweep_csv(report) -> str:
    header = [
        "value",
        "r0",
        "lambda_e",
        "eq_distance",
        "convergence_time",
        "final_distance",
        "unstable_roots",
        "monotone",
        "verdict",
    ]
    rows = [
        [
            row.value,
            row.r0,
            row.lambda_e,
            row.eq_distance,
            row.convergence_time,
            row.final_distance,
            row.unstable_roots,
            row.monotone,
            row.verdict,
        ]
        for row in report.rows
    ]
    return render_csv(header, rows)


def _exit_code(verdicts: dict) -> int:
    return 0 if all(verdicts.values()) else 2


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_r0(cfg: RunConfig):
    r0 = basic_reproduction_number(cfg.params, cfg.profile)
    return {"command": "r0", "R0": r0, "verdicts": {}}, {}


def _cmd_equilibria(cfg: RunConfig):
    scalars = _endemic_scalars(cfg)
    params = cfg.params
    disease_free = {
        "susceptible_mass": params.lambda_influx / params.mu,
        "amplitude": params.lambda_influx,
        "decay": params.mu,
    }
    if scalars["lambda_E"] is None:
        endemic = None
    else:
        endemic = {
            "lambda_E": scalars["lambda_E"],
            "I_E": scalars["I_E"],
            "J_E": scalars["J_E"],
            "susceptible_mass": params.lambda_influx / (params.mu + scalars["lambda_E"]),
        }
    summary = {
        "command": "equilibria",
        **scalars,
        "disease_free": disease_free,
        "endemic": endemic,
        "verdicts": {},
    }
    return summary, {}


def _cmd_simulate(cfg: RunConfig):
    initial = _initial_state(cfg)
    scalars = _endemic_scalars(cfg)
    # track the endemic functional when it is well defined (above threshold,
    # no chronic transmission, weight condition) and finite at the start;
    # at beta_J = 0 the chronic term carries zero weight, so only the acute
    # aggregate must stay off the log singularity
    v_ref = None
    if (
        scalars["lambda_E"] is not None
        and cfg.params.beta_J == 0.0
        and initial.big_i > 0.0
        and lyapunov_condition(cfg.params, cfg.profile, scalars["lambda_E"]).holds
    ):
        v_ref = endemic_equilibrium(cfg.params, cfg.profile, cfg.grid)
    sim = _sim_config(cfg, track_endemic=v_ref is not None, v_reference=v_ref)
    traj = simulate(initial, cfg.params, cfg.profile, cfg.grid, sim)
    initial_norm = state_norm(initial, cfg.grid)
    slack = dissipativity_check(traj, cfg.params, initial_norm)
    worst = float(np.min(slack))
    allowed = DISSIPATIVITY_TOL_SCALE * cfg.params.lambda_influx / cfg.params.nu_min
    verdicts = {"dissipative": bool(worst >= -allowed)}
    final = traj.final_state
    summary = {
        "command": "simulate",
        **scalars,
        "horizon": cfg.horizon,
        "final": {
            "t": final.time,
            "I": final.big_i,
            "J": final.big_j,
            "int_s": float(np.sum(final.s)) * cfg.grid.da,
            "lambda": cfg.params.beta_I * final.big_i + cfg.params.beta_J * final.big_j,
        },
        "worst_dissipativity_slack": worst,
        "verdicts": verdicts,
    }
    return summary, {"trajectory.csv": _trajectory_csv(traj, cfg)}


def _matched_initials(cfg: RunConfig, grid):
    """Aggregated and infection-age initials with identical aggregates.

    Always launched from the scaled infection-free density (the `start` key
    is ignored here): the crosscheck compares integrators, so it needs a
    launch point expressible in both state spaces, with seed_i and seed_j
    realized as exponential infection-age densities of matching mass.
    """
    base = disease_free_equilibrium(cfg.params, grid)
    s0 = cfg.s_scale * base.s
    dens_i = cell_averaged_exponential(cfg.seed_i, 1.0, grid) if cfg.seed_i > 0 else np.zeros(grid.n_cells)
    dens_j = cell_averaged_exponential(cfg.seed_j, 1.0, grid) if cfg.seed_j > 0 else np.zeros(grid.n_cells)
    big_i = float(np.sum(dens_i)) * grid.da
    big_j = float(np.sum(dens_j)) * grid.da
    agg = SystemState(s=s0, big_i=big_i, big_j=big_j, time=0.0)
    age = InfectionAgeState(s=s0.copy(), i=dens_i, j=dens_j, time=0.0)
    return agg, age


def _crosscheck_mismatch(cfg: RunConfig, grid) -> float:
    """Sup mismatch between the two integrators on one grid.

    Covers the per-step force and extinction monitors and the aggregated
    counts I, J at shared snapshot times, so both counts enter the metric
    directly even when one transmission coefficient vanishes.
    """
    stride = max(1, round(1.0 / grid.da))
    agg0, age0 = _matched_initials(cfg, grid)
    config = SimConfig(dt=grid.da, horizon=cfg.horizon, output_stride=stride)
    ta = simulate(agg0, cfg.params, cfg.profile, grid, config)
    tb = simulate_infection_age(age0, cfg.params, cfg.profile, grid, config)
    err = float(np.max(np.abs(ta.monitors["force"] - tb.monitors["force"])))
    err = max(err, float(np.max(np.abs(ta.monitors["extinction"] - tb.monitors["extinction"]))))
    for snap_a, snap_b in zip(ta.states, tb.states):
        err = max(err, abs(snap_a.big_i - snap_b.big_i), abs(snap_a.big_j - snap_b.big_j))
    return err


def _cmd_crosscheck(cfg: RunConfig):
    if cfg.seed_i + cfg.seed_j <= 0.0:
        raise ParameterDomainError(
            "crosscheck needs an infected initial: seed_i + seed_j must be positive"
        )
    grid_coarse = cfg.grid
    grid_fine = make_grid(
        grid_coarse.da / 2.0,
        grid_coarse.a_max,
        cfg.params,
        truncation_tol=1.0,
    )
    mismatch_coarse = _crosscheck_mismatch(cfg, grid_coarse)
    mismatch_fine = _crosscheck_mismatch(cfg, grid_fine)
    ratio = mismatch_coarse / mismatch_fine if mismatch_fine > 0.0 else math.inf
    first_order = bool(
        abs(ratio - CROSSCHECK_RATIO_TARGET) <= CROSSCHECK_RATIO_SLACK
    )
    summary = {
        "command": "crosscheck",
        "R0": basic_reproduction_number(cfg.params, cfg.profile),
        "da_coarse": grid_coarse.da,
        "da_fine": grid_fine.da,
        "mismatch_coarse": mismatch_coarse,
        "mismatch_fine": mismatch_fine,
        "ratio": ratio,
        "verdicts": {"first_order": first_order},
    }
    return summary, {}


def _cmd_spectrum(cfg: RunConfig):
    ctx = make_context(cfg.params, cfg.profile, cfg.grid)
    unstable = count_unstable_roots(ctx)
    bound = root_bound(ctx)
    margin = imaginary_axis_margin(ctx, omega_max=bound)
    points, values = contour_scan(ctx)
    phases = np.unwrap(np.angle(values))
    winding_running = (phases - phases[0]) / (2.0 * math.pi)
    rows = [
        [points[k].real, points[k].imag, values[k].real, values[k].imag, winding_running[k]]
        for k in range(points.size)
    ]
    spectrum_csv = render_csv(
        ["re_z", "im_z", "re_delta", "im_delta", "winding"], rows
    )
    eq = ctx.equilibrium
    summary = {
        "command": "spectrum",
        "R0": basic_reproduction_number(cfg.params, cfg.profile),
        "lambda_E": eq.force,
        "I_E": eq.big_i,
        "J_E": eq.big_j,
        "unstable_roots": unstable,
        "winding": float(winding_running[-1]),
        "imaginary_axis_margin": margin,
        "contour_bound": bound,
        "verdicts": {"stable": unstable == 0},
    }
    return summary, {"spectrum.csv": spectrum_csv}


def _cmd_lyapunov(cfg: RunConfig):
    scalars = _endemic_scalars(cfg)
    initial = _initial_state(cfg)
    condition = None
    if scalars["lambda_E"] is not None:
        if cfg.params.beta_J != 0.0:
            raise ParameterDomainError(
                "the endemic functional applies only at beta_J = 0; "
                f"got beta_J = {cfg.params.beta_J!r} with R0 > 1"
            )
        cond = lyapunov_condition(cfg.params, cfg.profile, scalars["lambda_E"])
        if not cond.holds:
            raise ParameterDomainError(
                "endemic monotonicity condition fails: "
                f"rate*kappa/(1-kappa) = {cond.direct_lhs!r} is not below "
                f"mu + lambda_E = {cond.direct_rhs!r}"
            )
        eq = endemic_equilibrium(cfg.params, cfg.profile, cfg.grid)
        traj = simulate(
            initial,
            cfg.params,
            cfg.profile,
            cfg.grid,
            _sim_config(cfg, track_endemic=True, v_reference=eq),
        )
        report = monitor(traj, "endemic")
        functional = "endemic"
        condition = {
            "direct_lhs": cond.direct_lhs,
            "direct_rhs": cond.direct_rhs,
            "displayed_lhs": cond.displayed_lhs,
            "displayed_holds": cond.displayed_holds,
            "holds": cond.holds,
        }
    else:
        traj = simulate(initial, cfg.params, cfg.profile, cfg.grid, _sim_config(cfg))
        report = monitor(traj, "extinction", rtol=0.0)
        functional = "extinction"
    summary = {
        "command": "lyapunov",
        **scalars,
        "functional": functional,
        "initial_value": float(report.values[0]),
        "final_value": float(report.values[-1]),
        "max_increase": report.max_increase,
        "max_excess": report.max_excess,
        "atol": report.atol,
        "rtol": report.rtol,
        "condition": condition,
        "verdicts": {"monotone": report.monotone},
    }
    return summary, {"trajectory.csv": _trajectory_csv(traj, cfg)}


def _cmd_fit(cfg: RunConfig):
    if cfg.fit_samples:
        table = load_samples(cfg.fit_samples)
        source = cfg.fit_samples
    else:
        ages = 0.5 * np.arange(81)
        table = np.column_stack(
            [ages, edmunds_reference(ages, cfg.kappa1, cfg.r1, cfg.s1)]
        )
        source = "generated"
    result = fit_exponential(table)
    summary = {
        "command": "fit",
        "source": source,
        "n_samples": int(table.shape[0]),
        "kappa": result.kappa,
        "rate": result.rate,
        "sse": result.sse,
        "iterations": result.iterations,
        "converged": result.converged,
        "verdicts": {"converged": result.converged},
    }
    return summary, {}


def _cmd_sweep(cfg: RunConfig):
    initials = make_initial_states(cfg.params, cfg.grid, cfg.n_initials)
    report = perturbation_sweep(
        cfg.params,
        cfg.profile,
        cfg.grid,
        cfg.eps_list,
        initials,
        horizon=cfg.horizon,
        tol=cfg.tol,
    )
    summary = {
        "command": "sweep",
        **_endemic_scalars(cfg),
        "rows": len(report.rows),
        "unstable_roots": report.rows[0].unstable_roots,
        "tol": cfg.tol,
        "horizon": cfg.horizon,
        "verdicts": {"all_rows": report.verdict_all},
    }
    return summary, {"sweep.csv": _sweep_csv(report)}


def _cmd_extinction(cfg: RunConfig):
    if not cfg.beta_I_list:
        raise ConfigError(
            "extinction sweep needs a non-empty beta_I_list", key="beta_I_list"
        )
    initials = make_initial_states(cfg.params, cfg.grid, cfg.n_initials)
    report = extinction_sweep(
        cfg.params,
        cfg.profile,
        cfg.grid,
        cfg.beta_I_list,
        initials,
        horizon=cfg.horizon,
        tol=cfg.tol,
    )
    summary = {
        "command": "extinction",
        "rows": len(report.rows),
        "tol": cfg.tol,
        "horizon": cfg.horizon,
        "verdicts": {"all_rows": report.verdict_all},
    }
    return summary, {"sweep.csv": _sweep_csv(report)}


_DISPATCH = {
    "r0": _cmd_r0,
    "equilibria": _cmd_equilibria,
    "simulate": _cmd_simulate,
    "crosscheck": _cmd_crosscheck,
    "spectrum": _cmd_spectrum,
    "lyapunov": _cmd_lyapunov,
    "fit": _cmd_fit,
    "sweep": _cmd_sweep,
    "extinction": _cmd_extinction,
}


def run_command(command: str, cfg: RunConfig) -> CommandResult:
    """Execute one command against a validated configuration.

    Returns a CommandResult whose files always include summary.json. Core
    errors propagate to the caller, which renders them as exit code 1.
    """
    if command not in _DISPATCH:
        raise ConfigError(
            f"unknown command {command!r} (expected one of {', '.join(COMMANDS)})",
            key="command",
        )
    summary, files = _DISPATCH[command](cfg)
    exit_code = _exit_code(summary["verdicts"])
    files = dict(files)
    files["summary.json"] = render_json(summary)
    return CommandResult(
        command=command, exit_code=exit_code, summary=summary, files=files
    )
