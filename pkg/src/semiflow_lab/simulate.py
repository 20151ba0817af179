"""Time integration of the aggregated system along characteristics.

The scheme locks the time step to the age step (dt = da) so transport is an
exact one-cell shift per step:

  * susceptible density: s_new[k] = s[k-1] * exp(-(mu + lambda) dt) with the
    force of infection frozen at its start-of-step value; the youngest cell
    receives the exact cell average of the boundary renewal with that frozen
    force, lambda_influx * (1 - exp(-(mu+lambda) dt)) / ((mu+lambda) dt);
  * aggregated counts: one explicit Euler step
    I += dt * (lambda * p_acute*[s] - nu_I * I) and likewise for J, with the
    discrete duals evaluated on the pre-step density.

The update is unconditionally positive for the density and positive for the
counts whenever nu * dt <= 1, which SimConfig validates. Monitors (force,
susceptible mass, norm, extinction functional, optionally the endemic
functional) are recorded at every step; full state snapshots are kept at a
constant stride.

A second integrator evolves the infection-age-structured variant (densities
i, j over infection age with boundary renewal) and serves as an aggregation
cross-check: its aggregated (I, J) matches the aggregated model to first
order in da.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError, ParameterDomainError
from .lyapunov import endemic_terms, lyapunov_weights
from .model import (
    AgeGrid,
    EquilibriumState,
    InfectionAgeState,
    ModelParams,
    SusceptibilityProfile,
    SystemState,
    cell_averaged_exponential,
    dual_weights,
    force_of_infection,
)

__all__ = [
    "SimConfig",
    "Trajectory",
    "step",
    "simulate",
    "simulate_infection_age",
    "dissipativity_check",
    "dissipativity_bound",
    "upper_envelope_check",
]

# monitors recorded for every trajectory, in column order
BASE_MONITORS = ("force", "susceptible_mass", "norm", "extinction")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    Attributes:
        dt: time step; must equal the grid's age step exactly.
        horizon: final time; the run takes ceil(horizon / dt) steps.
        output_stride: record a full state snapshot every this many steps.
        track_endemic: also record the endemic functional V against
            `v_reference` (required when set).
        v_reference: equilibrium used by the endemic functional monitor.
    """

    dt: float
    horizon: float
    output_stride: int = 20
    track_endemic: bool = False
    v_reference: EquilibriumState | None = None

    def __post_init__(self):
        if not (self.dt > 0.0 and self.horizon > 0.0):
            raise ParameterDomainError("dt and horizon must be positive")
        if self.output_stride < 1:
            raise ParameterDomainError("output_stride must be a positive integer")
        if self.track_endemic and self.v_reference is None:
            raise ParameterDomainError("track_endemic requires a v_reference equilibrium")

    def validate_against(self, params: ModelParams, grid: AgeGrid) -> None:
        if self.dt != grid.da:
            raise ParameterDomainError(
                f"time step dt={self.dt!r} must equal the age step da={grid.da!r}"
            )
        worst = max(params.nu_I, params.nu_J) * self.dt
        if worst > 1.0:
            raise ParameterDomainError(
                f"explicit count update needs nu*dt <= 1, got {worst:.3g}"
            )

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-12))


@dataclass
class Trajectory:
    """Recorded output of one integration.

    `states` holds snapshots at a constant stride in time starting at t=0;
    `final_state` is the exact end state regardless of stride alignment.
    `monitor_times` and the arrays in `monitors` cover every step (length
    n_steps + 1).
    """

    states: list[SystemState]
    final_state: SystemState
    monitor_times: np.ndarray
    monitors: dict[str, np.ndarray]
    snapshot_stride_steps: int = 1

    def monitor(self, name: str) -> np.ndarray:
        return self.monitors[name]


def step(
    state: SystemState,
    params: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
) -> SystemState:
    """Advance one time step of dt = grid.da.

    Standalone single-step entry point; `simulate` performs the identical
    arithmetic in a buffered loop.
    """
    if state.s.shape[0] != grid.n_cells:
        raise ParameterDomainError("state density does not match the grid")
    h = grid.da
    lam = force_of_infection(params, state)
    total_rate = params.mu + lam
    decay = math.exp(-total_rate * h)
    w_acute, w_chronic = dual_weights(profile, grid)
    dual_i = float(w_acute @ state.s)
    dual_j = float(w_chronic @ state.s)

    s_new = np.empty_like(state.s)
    s_new[1:] = state.s[:-1] * decay
    s_new[0] = params.lambda_influx * (-math.expm1(-total_rate * h)) / (total_rate * h)
    big_i = state.big_i + h * (lam * dual_i - params.nu_I * state.big_i)
    big_j = state.big_j + h * (lam * dual_j - params.nu_J * state.big_j)

    if not (np.all(np.isfinite(s_new)) and math.isfinite(big_i) and math.isfinite(big_j)):
        raise NumericalFailureError("non-finite values after one step", time=state.time)
    return SystemState(s=s_new, big_i=big_i, big_j=big_j, time=state.time + h)


def simulate(
    initial: SystemState,
    params: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
    config: SimConfig,
) -> Trajectory:
    """Integrate the aggregated system over the configured horizon.

    Returns a Trajectory with per-step monitors and constant-stride
    snapshots. Raises NumericalFailureError if the state leaves the finite
    range (checked every step through the recorded monitors and at every
    snapshot for the density).
    """
    config.validate_against(params, grid)
    if initial.s.shape[0] != grid.n_cells:
        raise ParameterDomainError("initial density does not match the grid")

    h = grid.da
    n_steps = config.n_steps
    stride = config.output_stride
    w_acute, w_chronic = dual_weights(profile, grid)
    gamma_i = params.beta_I / params.nu_I
    gamma_j = params.beta_J / params.nu_J

    track_v = config.track_endemic
    if track_v:
        eq_ref = config.v_reference
        keep, alpha = lyapunov_weights(profile, grid, eq_ref)

    n_mon = n_steps + 1
    series = {name: np.empty(n_mon) for name in BASE_MONITORS}
    if track_v:
        series["endemic"] = np.empty(n_mon)
    times = h * np.arange(n_mon)

    s = initial.s.copy()
    s_next = np.empty_like(s)
    big_i = float(initial.big_i)
    big_j = float(initial.big_j)
    t0 = initial.time

    states: list[SystemState] = []

    def record(idx: int) -> None:
        lam = params.beta_I * big_i + params.beta_J * big_j
        series["force"][idx] = lam
        mass = float(np.sum(s)) * h
        series["susceptible_mass"][idx] = mass
        series["norm"][idx] = mass + big_i + big_j
        series["extinction"][idx] = gamma_i * big_i + gamma_j * big_j
        if track_v:
            series["endemic"][idx] = endemic_terms(s, big_i, eq_ref, keep, alpha)

    record(0)
    states.append(SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0))

    for n in range(1, n_steps + 1):
        lam = params.beta_I * big_i + params.beta_J * big_j
        total_rate = params.mu + lam
        decay = math.exp(-total_rate * h)
        dual_i = float(w_acute @ s)
        dual_j = float(w_chronic @ s)

        np.multiply(s[:-1], decay, out=s_next[1:])
        s_next[0] = params.lambda_influx * (-math.expm1(-total_rate * h)) / (total_rate * h)
        big_i = big_i + h * (lam * dual_i - params.nu_I * big_i)
        big_j = big_j + h * (lam * dual_j - params.nu_J * big_j)
        s, s_next = s_next, s

        record(n)
        if not (math.isfinite(series["norm"][n]) and math.isfinite(series["force"][n])):
            raise NumericalFailureError(
                "simulation diverged (non-finite monitor)", step=n, time=t0 + n * h
            )
        if n % stride == 0:
            if not np.all(np.isfinite(s)):
                raise NumericalFailureError(
                    "simulation diverged (non-finite density)", step=n, time=t0 + n * h
                )
            states.append(SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0 + n * h))

    final_state = SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0 + n_steps * h)
    return Trajectory(
        states=states,
        final_state=final_state,
        monitor_times=t0 + times,
        monitors=series,
        snapshot_stride_steps=stride,
    )


# ---------------------------------------------------------------------------
# a priori bound and envelope checks
# ---------------------------------------------------------------------------

def dissipativity_bound(params: ModelParams, initial_norm: float, t: np.ndarray) -> np.ndarray:
    """The absorbing-ball estimate evaluated at times t.

    bound(t) = (influx / nu_min) * (1 - exp(-nu_min t)) + initial_norm * exp(-nu_min t),
    where nu_min = min(mu, nu_I, nu_J). Trajectory norms never exceed it (up
    to first-order discretization error).
    """
    nu = params.nu_min
    decay = np.exp(-nu * np.asarray(t, dtype=float))
    return (params.lambda_influx / nu) * (1.0 - decay) + initial_norm * decay


def dissipativity_check(
    traj: Trajectory, params: ModelParams, initial_norm: float
) -> np.ndarray:
    """Per-step slack bound(t) - norm(t); non-negative up to scheme error."""
    elapsed = traj.monitor_times - traj.monitor_times[0]
    return dissipativity_bound(params, initial_norm, elapsed) - traj.monitors["norm"]


def upper_envelope_check(
    traj: Trajectory,
    params: ModelParams,
    grid: AgeGrid,
    tol: float = 1e-12,
) -> int:
    """Count density cells exceeding the steady envelope influx * exp(-mu a).

    The envelope holds for every renewed cell (age < elapsed time). When the
    initial density already sits below the envelope it holds everywhere, and
    all cells of every snapshot are checked.
    """
    envelope = cell_averaged_exponential(params.lambda_influx, params.mu, grid)
    allowed = envelope * (1.0 + tol) + 1e-300
    t0 = traj.states[0].time
    initially_dominated = bool(np.all(traj.states[0].s <= allowed))
    ages = grid.left_edges
    violations = 0
    for snap in traj.states:
        if initially_dominated:
            mask = np.ones(grid.n_cells, dtype=bool)
        else:
            mask = ages < (snap.time - t0)
        violations += int(np.count_nonzero(snap.s[mask] > allowed[mask]))
    return violations


# ---------------------------------------------------------------------------
# infection-age-structured variant (aggregation oracle)
# ---------------------------------------------------------------------------

def simulate_infection_age(
    initial: InfectionAgeState,
    params: ModelParams,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
    config: SimConfig,
) -> Trajectory:
    """Integrate the infection-age-structured system.

    The densities i(t, tau), j(t, tau) ride the same transport scheme as s
    (shift plus exponential decay at rates nu_I, nu_J) with boundary renewal
    i(t, 0) = lambda(t) p_acute*[s], j(t, 0) = lambda(t) p_chronic*[s]; the
    trajectory reports the aggregated counts I = integral of i, J = integral
    of j, so it is directly comparable with `simulate`.
    """
    config.validate_against(params, grid)
    for name, arr in (("s", initial.s), ("i", initial.i), ("j", initial.j)):
        if arr.shape[0] != grid.n_cells:
            raise ParameterDomainError(f"initial density {name} does not match the grid")

    h = grid.da
    n_steps = config.n_steps
    stride = config.output_stride
    w_acute, w_chronic = dual_weights(profile, grid)
    gamma_i = params.beta_I / params.nu_I
    gamma_j = params.beta_J / params.nu_J
    decay_i = math.exp(-params.nu_I * h)
    decay_j = math.exp(-params.nu_J * h)
    # exact cell average of a unit boundary inflow decaying at rate nu
    birth_i = (-math.expm1(-params.nu_I * h)) / (params.nu_I * h)
    birth_j = (-math.expm1(-params.nu_J * h)) / (params.nu_J * h)

    s = initial.s.copy()
    di = initial.i.copy()
    dj = initial.j.copy()
    s_next = np.empty_like(s)
    di_next = np.empty_like(di)
    dj_next = np.empty_like(dj)
    t0 = initial.time

    n_mon = n_steps + 1
    series = {name: np.empty(n_mon) for name in BASE_MONITORS}
    times = h * np.arange(n_mon)
    states: list[SystemState] = []

    def aggregates() -> tuple[float, float]:
        return float(np.sum(di)) * h, float(np.sum(dj)) * h

    def record(idx: int, big_i: float, big_j: float) -> None:
        lam = params.beta_I * big_i + params.beta_J * big_j
        series["force"][idx] = lam
        mass = float(np.sum(s)) * h
        series["susceptible_mass"][idx] = mass
        series["norm"][idx] = mass + big_i + big_j
        series["extinction"][idx] = gamma_i * big_i + gamma_j * big_j

    big_i, big_j = aggregates()
    record(0, big_i, big_j)
    states.append(SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0))

    for n in range(1, n_steps + 1):
        lam = params.beta_I * big_i + params.beta_J * big_j
        total_rate = params.mu + lam
        decay_s = math.exp(-total_rate * h)
        inflow_i = lam * float(w_acute @ s)
        inflow_j = lam * float(w_chronic @ s)

        np.multiply(s[:-1], decay_s, out=s_next[1:])
        s_next[0] = params.lambda_influx * (-math.expm1(-total_rate * h)) / (total_rate * h)
        np.multiply(di[:-1], decay_i, out=di_next[1:])
        di_next[0] = inflow_i * birth_i
        np.multiply(dj[:-1], decay_j, out=dj_next[1:])
        dj_next[0] = inflow_j * birth_j
        s, s_next = s_next, s
        di, di_next = di_next, di
        dj, dj_next = dj_next, dj

        big_i, big_j = aggregates()
        record(n, big_i, big_j)
        if not math.isfinite(series["norm"][n]):
            raise NumericalFailureError(
                "infection-age simulation diverged", step=n, time=t0 + n * h
            )
        if n % stride == 0:
            states.append(SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0 + n * h))

    final_state = SystemState(s=s.copy(), big_i=big_i, big_j=big_j, time=t0 + n_steps * h)
    return Trajectory(
        states=states,
        final_state=final_state,
        monitor_times=t0 + times,
        monitors=series,
        snapshot_stride_steps=stride,
    )
