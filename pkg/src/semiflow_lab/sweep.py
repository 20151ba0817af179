"""Parameter sweeps: chronic-transmission perturbation and extinction rows.

Two experiments share one report shape:

  * perturbation_sweep raises the chronic transmission coefficient from the
    baseline of zero through a list of epsilon values and checks that every
    admissible initial state converges to the perturbed endemic equilibrium;
  * extinction_sweep runs a list of subthreshold acute transmission
    coefficients and checks relaxation to the disease-free state with a
    monotone extinction functional.

Convergence is operationalized as entering the relative tolerance ball
around the target equilibrium and remaining inside it through the final
tenth of the horizon. Near-threshold extinction rows (|R0 - 1| < 0.05) get
ten times the horizon. Rows are independent; SEMIFLOW_THREADS caps the
thread pool that runs them, and the report always assembles in row order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ParameterDomainError
from .lyapunov import monitor
from .model import (
    AgeGrid,
    EquilibriumState,
    ModelParams,
    SusceptibilityProfile,
    SystemState,
    basic_reproduction_number,
    disease_free_equilibrium,
    endemic_equilibrium,
)
from .simulate import SimConfig, Trajectory, simulate
from .spectral import count_unstable_roots, lyapunov_condition, make_context

__all__ = [
    "SweepRow",
    "SweepReport",
    "make_initial_states",
    "perturbation_sweep",
    "extinction_sweep",
]

NEAR_THRESHOLD_WINDOW = 0.05
NEAR_THRESHOLD_FACTOR = 10.0
SNAPSHOT_INTERVAL = 5.0

# (density scale, acute count, chronic count): all dominated by the
# disease-free profile and all carrying acute infection at t = 0.
INITIAL_PATTERNS = (
    (1.0, 0.1, 0.0),
    (0.5, 0.05, 0.05),
    (0.8, 0.01, 0.2),
    (0.3, 0.5, 0.0),
    (1.0, 0.01, 0.1),
    (0.6, 0.2, 0.1),
    (0.9, 0.05, 0.0),
    (0.4, 0.3, 0.3),
)


# ---------------------------------------------------------------------------
# report shape
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    """One sweep row; fields that do not apply to the row kind are None.

    `value` is the swept coefficient (chronic transmission for perturbation
    rows, acute transmission for extinction rows). `eq_distance` is the
    absolute distance of the row's endemic equilibrium from the baseline
    one; `final_distance` and the tolerance ball are relative to the norm
    of the row's target equilibrium. `convergence_time` is the worst
    ball-entry time over initials, None when any initial failed to settle.
    """

    value: float
    r0: float
    lambda_e: float | None
    eq_distance: float | None
    convergence_time: float | None
    final_distance: float
    unstable_roots: int | None
    monotone: bool | None
    verdict: bool


@dataclass(frozen=True)
class SweepReport:
    """Ordered sweep rows plus the conjunction of their verdicts."""

    kind: str
    rows: tuple[SweepRow, ...]
    verdict_all: bool

    def __post_init__(self):
        values = [row.value for row in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ParameterDomainError("sweep rows must have strictly increasing values")
        if self.verdict_all != all(row.verdict for row in self.rows):
            raise ParameterDomainError("verdict_all must equal the conjunction of row verdicts")


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def make_initial_states(
    params: ModelParams, grid: AgeGrid, n: int
) -> list[SystemState]:
    """Deterministic table of admissible initial states.

    Every pattern scales the disease-free profile by at most one (so the
    extinction functional's domination hypothesis holds) and seeds a
    strictly positive acute count.
    """
    if not (1 <= n <= len(INITIAL_PATTERNS)):
        raise ParameterDomainError(
            f"n must lie in [1, {len(INITIAL_PATTERNS)}], got {n}"
        )
    base = disease_free_equilibrium(params, grid).s
    return [
        SystemState(s=scale * base, big_i=big_i, big_j=big_j, time=0.0)
        for scale, big_i, big_j in INITIAL_PATTERNS[:n]
    ]


def _thread_count(n_rows: int) -> int:
    raw = os.environ.get("SEMIFLOW_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(
            f"SEMIFLOW_THREADS must be a positive integer, got {raw!r}",
            key="SEMIFLOW_THREADS",
        ) from exc
    if threads < 1:
        raise ConfigError(
            f"SEMIFLOW_THREADS must be a positive integer, got {raw!r}",
            key="SEMIFLOW_THREADS",
        )
    return min(threads, max(1, n_rows))


def _run_rows(worker, row_args):
    threads = _thread_count(len(row_args))
    if threads == 1:
        return [worker(arg) for arg in row_args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, row_args))


def _sorted_unique(values, label: str) -> list[float]:
    ordered = sorted(float(v) for v in values)
    if not ordered:
        raise ParameterDomainError(f"{label} must not be empty")
    if any(b <= a for a, b in zip(ordered, ordered[1:])):
        raise ParameterDomainError(f"{label} must not contain duplicates")
    return ordered


def _relative_distance(
    s: np.ndarray, big_i: float, big_j: float, eq: EquilibriumState, grid: AgeGrid
) -> float:
    gap = (
        float(np.abs(s - eq.s).sum()) * grid.da
        + abs(big_i - eq.big_i)
        + abs(big_j - eq.big_j)
    )
    scale = float(eq.s.sum()) * grid.da + eq.big_i + eq.big_j
    return gap / scale


def _settling_scan(
    traj: Trajectory, eq: EquilibriumState, grid: AgeGrid, horizon: float, tol: float
) -> tuple[bool, float | None, float]:
    """(settled, ball-entry time, final relative distance) for one run.

    Settled means every snapshot from the entry time onward sits inside the
    relative tol-ball and the entry happens no later than 90% of the horizon.
    """
    snaps = list(traj.states)
    if not snaps or snaps[-1].time < traj.final_state.time:
        snaps.append(traj.final_state)
    distances = [
        _relative_distance(s.s, s.big_i, s.big_j, eq, grid) for s in snaps
    ]
    final_distance = distances[-1]
    entry = None
    for snap, distance in zip(reversed(snaps), reversed(distances)):
        if distance > tol:
            break
        entry = snap.time
    settled = entry is not None and entry <= 0.9 * horizon
    return settled, (entry if settled else None), final_distance


def _snapshot_stride(grid: AgeGrid) -> int:
    return max(1, int(round(SNAPSHOT_INTERVAL / grid.da)))


# ---------------------------------------------------------------------------
# perturbation experiment
# ---------------------------------------------------------------------------

def perturbation_sweep(
    params_base: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
    eps_list,
    initials,
    horizon: float,
    tol: float,
) -> SweepReport:
    """Sweep the chronic transmission coefficient upward from zero.

    For each epsilon the endemic equilibrium of the perturbed configuration
    is computed, every initial state is integrated over the horizon, and the
    row verdict requires all runs to settle into the relative tol-ball plus
    a clean spectral certificate. The certificate comes from the baseline
    characteristic function, which does not involve the chronic coefficient.

    Args:
        params_base: baseline rates; the chronic transmission must be zero
            and the baseline must be superthreshold with the profile
            condition rate*kappa/(1-kappa) < mu + lambda_E satisfied.
        eps_list: chronic transmission values, non-negative, no duplicates.
        initials: admissible states; each needs acute plus chronic count
            positive, and a strictly positive acute count when the list
            includes epsilon = 0 (the unperturbed attractivity statement
            only covers that class).
        horizon: integration span per run.
        tol: relative radius of the settling ball.
    """
    if params_base.beta_J != 0.0:
        raise ParameterDomainError(
            "perturbation baseline must have zero chronic transmission"
        )
    if basic_reproduction_number(params_base, profile) <= 1.0:
        raise ParameterDomainError(
            "perturbation sweep needs a superthreshold baseline (R0 > 1)"
        )
    eq_base = endemic_equilibrium(params_base, profile, grid)
    condition = lyapunov_condition(params_base, profile, eq_base.force)
    if not condition.holds:
        raise ParameterDomainError(
            "profile condition rate*kappa/(1-kappa) < mu + lambda_E fails; "
            "the baseline attractivity hypothesis is not met"
        )
    eps_values = _sorted_unique(eps_list, "eps_list")
    if eps_values[0] < 0.0:
        raise ParameterDomainError("epsilon values must be non-negative")
    initials = list(initials)
    if not initials:
        raise ParameterDomainError("need at least one initial state")
    for state in initials:
        if state.big_i + state.big_j <= 0.0:
            raise ParameterDomainError(
                "initial states must carry infection (I + J > 0)"
            )
        if eps_values[0] == 0.0 and state.big_i <= 0.0:
            raise ParameterDomainError(
                "the epsilon = 0 row requires a positive acute count"
            )

    certificate = count_unstable_roots(make_context(params_base, profile, grid))
    config = SimConfig(
        dt=grid.da, horizon=horizon, output_stride=_snapshot_stride(grid)
    )

    def row_worker(eps: float) -> SweepRow:
        params_eps = replace(params_base, beta_J=eps)
        r0 = basic_reproduction_number(params_eps, profile)
        eq_eps = endemic_equilibrium(params_eps, profile, grid)
        eq_distance = (
            float(np.abs(eq_eps.s - eq_base.s).sum()) * grid.da
            + abs(eq_eps.big_i - eq_base.big_i)
            + abs(eq_eps.big_j - eq_base.big_j)
        )
        settled_all = True
        worst_entry = 0.0
        worst_final = 0.0
        for state in initials:
            traj = simulate(state, params_eps, profile, grid, config)
            settled, entry, final_distance = _settling_scan(
                traj, eq_eps, grid, horizon, tol
            )
            settled_all = settled_all and settled
            worst_final = max(worst_final, final_distance)
            if settled:
                worst_entry = max(worst_entry, entry)
        return SweepRow(
            value=eps,
            r0=r0,
            lambda_e=eq_eps.force,
            eq_distance=eq_distance,
            convergence_time=worst_entry if settled_all else None,
            final_distance=worst_final,
            unstable_roots=certificate,
            monotone=None,
            verdict=settled_all and certificate == 0,
        )

    rows = tuple(_run_rows(row_worker, eps_values))
    return SweepReport(
        kind="perturbation", rows=rows, verdict_all=all(r.verdict for r in rows)
    )


# ---------------------------------------------------------------------------
# extinction experiment
# ---------------------------------------------------------------------------

def extinction_sweep(
    params_base: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
    beta_I_list,
    initials,
    horizon: float,
    tol: float,
) -> SweepReport:
    """Run subthreshold acute transmission rows toward the disease-free state.

    Every listed coefficient must put the configuration at or below the
    threshold; a superthreshold row is a precondition error naming the row.
    The row verdict requires every initial to settle into the relative
    tol-ball around the disease-free state and the extinction functional to
    be non-increasing along every run. Rows within 0.05 of R0 = 1 integrate
    ten times longer.
    """
    beta_values = _sorted_unique(beta_I_list, "beta_I_list")
    initials = list(initials)
    if not initials:
        raise ParameterDomainError("need at least one initial state")
    for index, beta_i in enumerate(beta_values):
        r0 = basic_reproduction_number(replace(params_base, beta_I=beta_i), profile)
        if r0 > 1.0:
            raise ParameterDomainError(
                f"row {index} (beta_I = {beta_i}) is superthreshold: R0 = {r0}"
            )
    target = disease_free_equilibrium(params_base, grid)

    def row_worker(beta_i: float) -> SweepRow:
        params_row = replace(params_base, beta_I=beta_i)
        r0 = basic_reproduction_number(params_row, profile)
        row_horizon = horizon
        if abs(r0 - 1.0) < NEAR_THRESHOLD_WINDOW:
            row_horizon = horizon * NEAR_THRESHOLD_FACTOR
        config = SimConfig(
            dt=grid.da, horizon=row_horizon, output_stride=_snapshot_stride(grid)
        )
        settled_all = True
        monotone_all = True
        worst_entry = 0.0
        worst_final = 0.0
        for state in initials:
            traj = simulate(state, params_row, profile, grid, config)
            settled, entry, final_distance = _settling_scan(
                traj, target, grid, row_horizon, tol
            )
            report = monitor(traj, "extinction", rtol=0.0)
            settled_all = settled_all and settled
            monotone_all = monotone_all and report.monotone
            worst_final = max(worst_final, final_distance)
            if settled:
                worst_entry = max(worst_entry, entry)
        return SweepRow(
            value=beta_i,
            r0=r0,
            lambda_e=None,
            eq_distance=None,
            convergence_time=worst_entry if settled_all else None,
            final_distance=worst_final,
            unstable_roots=None,
            monotone=monotone_all,
            verdict=settled_all and monotone_all,
        )

    rows = tuple(_run_rows(row_worker, beta_values))
    return SweepReport(
        kind="extinction", rows=rows, verdict_all=all(r.verdict for r in rows)
    )
