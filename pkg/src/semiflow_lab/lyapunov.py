"""Lyapunov-type functionals and monotonicity reports.

Two functionals certify the two asymptotic regimes numerically:

  * extinction functional  L = (beta_I/nu_I) I + (beta_J/nu_J) J,
    non-increasing along trajectories in the subthreshold regime whenever the
    initial susceptible density sits below the steady profile;
  * endemic functional     V = integral alpha(a) g(s/s_eq) da + I_eq g(I/I_eq)
    with alpha = p_acute * s_eq and g(x) = x - ln x - 1, non-increasing along
    chronic-transmission-free endemic trajectories when the profile condition
    rate*kappa/(1-kappa) < mu + lambda_E holds.

The weights alpha are exact per-cell integrals and every cell the floating
point representation supports is kept: the density term and the acute-count
term cancel each other's sign-indefinite parts only when the weighted
integral runs over the whole grid, so dropping representable tail cells
would let the functional rise along perfectly good trajectories. Only cells
whose weight or equilibrium density underflows outright are excluded.
Monitors flag a violation only when a step-to-step increment exceeds 1e-10
absolute plus 1e-8 of the current value, the noise floor of the first-order
scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ParameterDomainError
from .model import (
    AgeGrid,
    EquilibriumState,
    ModelParams,
    SusceptibilityProfile,
    SystemState,
)

if TYPE_CHECKING:  # pragma: no cover
    from .simulate import Trajectory

__all__ = [
    "LyapunovReport",
    "convexity_gap",
    "lyapunov_weights",
    "extinction_functional",
    "endemic_functional",
    "monitor",
]

MONOTONE_ATOL = 1e-10
MONOTONE_RTOL = 1e-8


def convexity_gap(x):
    """g(x) = x - ln(x) - 1: non-negative, strictly convex, zero only at 1."""
    return x - np.log(x) - 1.0


def lyapunov_weights(
    profile: SusceptibilityProfile, grid: AgeGrid, eq: EquilibriumState
) -> tuple[np.ndarray, np.ndarray]:
    """Kept-cell mask and exact cell integrals of p_acute(a) * s_eq(a).

    The equilibrium density is amplitude * exp(-decay a), so each cell weight
    is a difference of two exponential integrals. Every cell with a strictly
    positive weight and a strictly positive equilibrium density is kept;
    truncating deeper than raw underflow would unbalance the functional's
    density and acute-count terms whenever tail cells carry mass far from
    equilibrium.
    """
    h = grid.da
    edges = grid.left_edges
    amp, dec = eq.amplitude, eq.decay
    total = amp * np.exp(-dec * edges) * (-np.expm1(-dec * h)) / dec
    cross_rate = dec + profile.rate
    cross = (
        profile.kappa
        * amp
        * np.exp(-cross_rate * edges)
        * (-np.expm1(-cross_rate * h))
        / cross_rate
    )
    alpha = total - cross
    keep = (alpha > 0.0) & (eq.s > 0.0)
    return keep, alpha[keep]


def endemic_terms(
    s: np.ndarray,
    big_i: float,
    eq: EquilibriumState,
    keep: np.ndarray,
    alpha: np.ndarray,
) -> float:
    """Endemic functional from precomputed weights (hot path for monitors)."""
    ratio = s[keep] / eq.s[keep]
    if big_i <= 0.0 or not np.all(ratio > 0.0):
        raise ParameterDomainError(
            "endemic functional undefined: density or acute count vanishes on a weighted cell"
        )
    return float(alpha @ convexity_gap(ratio) + eq.big_i * convexity_gap(big_i / eq.big_i))


def extinction_functional(state: SystemState, params: ModelParams) -> float:
    """L = (beta_I/nu_I) I + (beta_J/nu_J) J."""
    return (params.beta_I / params.nu_I) * state.big_i + (
        params.beta_J / params.nu_J
    ) * state.big_j


def endemic_functional(
    state: SystemState,
    eq: EquilibriumState,
    profile: SusceptibilityProfile,
    grid: AgeGrid,
) -> float:
    """Relative-entropy-type distance of a state to the endemic equilibrium.

    Zero exactly at (s, I) = (s_eq, I_eq); the chronic count J does not enter.
    Requires strictly positive density on every weighted cell and I > 0.
    """
    keep, alpha = lyapunov_weights(profile, grid, eq)
    return endemic_terms(state.s, state.big_i, eq, keep, alpha)


@dataclass(frozen=True)
class LyapunovReport:
    """Monotonicity verdict for one functional along one trajectory.

    `max_increase` is the largest positive step increment (0 when the series
    never rises); `max_excess` is the largest increment beyond the combined
    tolerance, so `monotone` is exactly `max_excess <= 0`.
    """

    times: np.ndarray
    values: np.ndarray
    max_increase: float
    max_excess: float
    monotone: bool
    atol: float
    rtol: float


def monitor(
    traj: "Trajectory",
    functional: str,
    atol: float = MONOTONE_ATOL,
    rtol: float = MONOTONE_RTOL,
) -> LyapunovReport:
    """Build a monotonicity report from a trajectory's recorded series.

    Args:
        traj: trajectory whose monitors include the requested series
            ("extinction" is always recorded; "endemic" requires the run to
            have been configured with track_endemic).
        functional: "extinction" or "endemic".
        atol: absolute per-step allowance.
        rtol: allowance relative to the functional's current value.
    """
    if functional not in ("extinction", "endemic"):
        raise ParameterDomainError(
            f"functional must be 'extinction' or 'endemic', got {functional!r}"
        )
    if functional not in traj.monitors:
        raise ParameterDomainError(
            "trajectory was not recorded with the endemic monitor; "
            "set track_endemic in the simulation config"
        )
    values = traj.monitors[functional]
    increments = np.diff(values)
    allowance = atol + rtol * values[:-1]
    if increments.size == 0:
        max_increase = 0.0
        max_excess = 0.0
    else:
        max_increase = float(max(np.max(increments), 0.0))
        max_excess = float(np.max(increments - allowance))
    return LyapunovReport(
        times=traj.monitor_times,
        values=values,
        max_increase=max_increase,
        max_excess=max_excess,
        monotone=max_excess <= 0.0,
        atol=atol,
        rtol=rtol,
    )
