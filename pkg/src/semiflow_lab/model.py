"""Domain types and equilibrium theory for the aggregated transmission model.

The model tracks a susceptible density s(t, a) over chronological age a and two
aggregated infective counts: acute cases I(t) and chronic carriers J(t). New
infections split by the age-dependent susceptibility profile

    p_chronic(a) = kappa * exp(-rate * a),      p_acute(a) = 1 - p_chronic(a),

and the force of infection is lambda(t) = beta_I * I + beta_J * J.

This module provides:
  * validated parameter / profile / grid / state containers,
  * closed-form dual pairings p*[exp(-c a)] with a quadrature cross-check,
  * the basic reproduction number R0,
  * the disease-free and endemic equilibria (the latter via bisection for the
    endemic force lambda_E).

Densities on a grid are stored as exact per-cell averages so that integral
quantities (duals, norms) are preserved by the discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    GridError,
    NoEndemicEquilibriumError,
    NumericalFailureError,
    ParameterDomainError,
)

__all__ = [
    "ModelParams",
    "SusceptibilityProfile",
    "AgeGrid",
    "SystemState",
    "EquilibriumState",
    "InfectionAgeState",
    "make_profile",
    "make_grid",
    "dual_exp",
    "dual_exp_quadrature",
    "dual_weights",
    "cell_averaged_exponential",
    "force_of_infection",
    "state_norm",
    "basic_reproduction_number",
    "disease_free_equilibrium",
    "endemic_force",
    "endemic_equilibrium",
]


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Demographic and epidemiological rates.

    Attributes:
        lambda_influx: birth/recruitment rate of susceptibles (> 0).
        mu: natural mortality rate (> 0).
        beta_I: transmission coefficient of acute infectives (> 0).
        beta_J: transmission coefficient of chronic carriers (>= 0).
        nu_I: total exit rate from the acute compartment (> 0).
        nu_J: total exit rate from the chronic compartment (> 0).
    """

    lambda_influx: float
    mu: float
    beta_I: float
    beta_J: float
    nu_I: float
    nu_J: float

    def __post_init__(self):
        for name in ("lambda_influx", "mu", "beta_I", "nu_I", "nu_J"):
            value = getattr(self, name)
            if not (value > 0.0) or not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be strictly positive, got {value!r}")
        if not (self.beta_J >= 0.0) or not math.isfinite(self.beta_J):
            raise ParameterDomainError(f"beta_J must be non-negative, got {self.beta_J!r}")

    @property
    def nu_min(self) -> float:
        """Slowest decay rate, governing the dissipativity bound."""
        return min(self.mu, self.nu_I, self.nu_J)


@dataclass(frozen=True)
class SusceptibilityProfile:
    """Exponential split of new infections into acute and chronic courses.

    p_chronic(a) = kappa * exp(-rate * a) is the probability that infection at
    age a leads to chronic carriage; p_acute = 1 - p_chronic. Both lie in
    [0, 1] for every age because 0 <= kappa <= 1 and rate > 0.
    """

    kappa: float
    rate: float

    def __post_init__(self):
        if not (0.0 <= self.kappa <= 1.0):
            raise ParameterDomainError(f"kappa must lie in [0, 1], got {self.kappa!r}")
        if not (self.rate > 0.0) or not math.isfinite(self.rate):
            raise ParameterDomainError(f"rate must be strictly positive, got {self.rate!r}")

    def p_chronic(self, a):
        return self.kappa * np.exp(-self.rate * np.asarray(a, dtype=float))

    def p_acute(self, a):
        return 1.0 - self.p_chronic(a)


def make_profile(kappa: float, rate: float) -> SusceptibilityProfile:
    """Validate and build a susceptibility profile.

    Args:
        kappa: chronic-fraction scale at age zero, in [0, 1].
        rate: exponential decay rate of the chronic fraction, > 0.
    """
    return SusceptibilityProfile(kappa=float(kappa), rate=float(rate))


@dataclass(frozen=True)
class AgeGrid:
    """Uniform truncation of the age half-line into n_cells cells of width da.

    Cell k covers [k*da, (k+1)*da); densities are stored as per-cell averages.
    """

    da: float
    a_max: float
    n_cells: int

    def __post_init__(self):
        if not (self.da > 0.0) or not (self.a_max > 0.0):
            raise GridError(f"da and a_max must be positive, got da={self.da!r}, a_max={self.a_max!r}")
        if self.n_cells < 1:
            raise GridError(f"grid must contain at least one cell, got n_cells={self.n_cells}")
        if abs(self.n_cells * self.da - self.a_max) > 4.0 * np.finfo(float).eps * self.a_max:
            raise GridError(
                f"a_max={self.a_max!r} is not an integer multiple of da={self.da!r}"
            )

    @property
    def left_edges(self) -> np.ndarray:
        return self.da * np.arange(self.n_cells)


def make_grid(
    da: float,
    a_max: float,
    params: ModelParams,
    truncation_tol: float = 1e-6,
) -> AgeGrid:
    """Build an age grid and enforce the tail-mass bound exp(-mu*a_max) <= tol.

    The truncated tail of the steady susceptible density carries relative mass
    exp(-mu*a_max); refusing grids above the tolerance keeps integral
    quantities (duals, norms) trustworthy to that tolerance.
    """
    n_cells = round(a_max / da)
    grid = AgeGrid(da=float(da), a_max=float(a_max), n_cells=int(n_cells))
    tail = math.exp(-params.mu * grid.a_max)
    if tail > truncation_tol:
        raise GridError(
            f"tail mass exp(-mu*a_max)={tail:.3e} exceeds truncation tolerance "
            f"{truncation_tol:.3e}; increase a_max"
        )
    return grid


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemState:
    """Aggregated-model state: susceptible density plus two infective counts.

    Attributes:
        s: per-cell-averaged susceptible density, one entry per grid cell.
        big_i: aggregated acute infectives I.
        big_j: aggregated chronic carriers J.
        time: current time.
    """

    s: np.ndarray
    big_i: float
    big_j: float
    time: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        object.__setattr__(self, "s", s)
        if s.ndim != 1:
            raise ParameterDomainError("s must be a one-dimensional density array")
        if not np.all(np.isfinite(s)) or not (np.all(s >= 0.0)):
            raise ParameterDomainError("susceptible density must be finite and non-negative")
        if not (self.big_i >= 0.0 and self.big_j >= 0.0):
            raise ParameterDomainError("infective counts must be non-negative")


@dataclass(frozen=True)
class EquilibriumState:
    """A stationary state, stored both on the grid and in closed form.

    The density is always amplitude * exp(-decay * a): the disease-free state
    has decay = mu and force = 0; the endemic state has decay = mu + lambda_E
    and force = lambda_E > 0. The grid field `s` holds exact cell averages.
    """

    s: np.ndarray
    big_i: float
    big_j: float
    force: float
    amplitude: float
    decay: float


@dataclass(frozen=True)
class InfectionAgeState:
    """Infection-age-structured state used by the aggregation cross-check.

    `s` is indexed by chronological age, `i` and `j` by infection age tau;
    all three live on the same grid and are per-cell averages.
    """

    s: np.ndarray
    i: np.ndarray
    j: np.ndarray
    time: float

    def __post_init__(self):
        for name in ("s", "i", "j"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)) or not np.all(arr >= 0.0):
                raise ParameterDomainError(f"density {name} must be finite and non-negative")


def force_of_infection(params: ModelParams, state: SystemState) -> float:
    """lambda = beta_I * I + beta_J * J for the given state."""
    return params.beta_I * state.big_i + params.beta_J * state.big_j


def state_norm(state: SystemState, grid: AgeGrid) -> float:
    """L1-type norm: integral of s plus both infective counts."""
    return float(np.sum(state.s) * grid.da + state.big_i + state.big_j)


# ---------------------------------------------------------------------------
# dual pairings
# ---------------------------------------------------------------------------

def dual_exp(profile: SusceptibilityProfile, which: str, c: float) -> float:
    """Dual pairing p*[exp(-c a)] = integral of p(a) exp(-c a) over a >= 0.

    The exponential profile admits closed forms:

        chronic: kappa / (c + rate)
        acute:   1/c - kappa / (c + rate)

    Args:
        profile: susceptibility profile.
        which: "acute" or "chronic".
        c: exponential decay of the paired density; must be > 0 or the
            integral diverges.

    Returns:
        The exact non-negative value of the pairing.
    """
    if not (c > 0.0):
        raise ParameterDomainError(f"dual pairing diverges for c={c!r} (need c > 0)")
    chronic = profile.kappa / (c + profile.rate)
    if which == "chronic":
        return chronic
    if which == "acute":
        return 1.0 / c - chronic
    raise ParameterDomainError(f"which must be 'acute' or 'chronic', got {which!r}")


def dual_exp_quadrature(
    profile: SusceptibilityProfile,
    which: str,
    c: float,
    a_split: float = 50.0,
) -> float:
    """Adaptive-quadrature evaluation of the same pairing (cross-check path).

    Integrates p(a) exp(-c a) on [0, a_split] adaptively and adds the exact
    analytic tail beyond a_split, so the result is quadrature-limited rather
    than truncation-limited. Never used by the model computations themselves.
    """
    if not (c > 0.0):
        raise ParameterDomainError(f"dual pairing diverges for c={c!r} (need c > 0)")
    if which == "chronic":
        integrand = lambda a: profile.kappa * math.exp(-profile.rate * a) * math.exp(-c * a)
        tail = profile.kappa * math.exp(-(c + profile.rate) * a_split) / (c + profile.rate)
    elif which == "acute":
        integrand = lambda a: (1.0 - profile.kappa * math.exp(-profile.rate * a)) * math.exp(-c * a)
        tail = math.exp(-c * a_split) / c - profile.kappa * math.exp(
            -(c + profile.rate) * a_split
        ) / (c + profile.rate)
    else:
        raise ParameterDomainError(f"which must be 'acute' or 'chronic', got {which!r}")
    head, _ = quad(integrand, 0.0, a_split, epsabs=1e-13, epsrel=1e-13, limit=200)
    return head + tail


def dual_weights(profile: SusceptibilityProfile, grid: AgeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-cell integrals of p_acute and p_chronic over each grid cell.

    With cell-averaged densities s_bar the discrete dual is dot(w, s_bar):
    it equals the exact integral of p(a) * (piecewise-constant density).
    """
    h = grid.da
    r = profile.rate
    edges = grid.left_edges
    # integral of kappa*exp(-r a) over [a_k, a_k + h]
    w_chronic = profile.kappa * np.exp(-r * edges) * (-np.expm1(-r * h)) / r
    w_acute = h - w_chronic
    return w_acute, w_chronic


def cell_averaged_exponential(amplitude: float, decay: float, grid: AgeGrid) -> np.ndarray:
    """Exact per-cell averages of amplitude * exp(-decay * a) on the grid."""
    h = grid.da
    if decay == 0.0:
        return np.full(grid.n_cells, float(amplitude))
    factor = (-np.expm1(-decay * h)) / (decay * h)
    return amplitude * factor * np.exp(-decay * grid.left_edges)


# ---------------------------------------------------------------------------
# threshold quantity and equilibria
# ---------------------------------------------------------------------------

def _transmission_response(params: ModelParams, profile: SusceptibilityProfile, lam: float) -> float:
    """Lambda_influx * sum_k (beta_k / nu_k) p_k*[exp(-(mu + lam) a)].

    Strictly decreasing in lam; equals R0 at lam = 0. The endemic force is
    its unique unit-level crossing.
    """
    c = params.mu + lam
    acute = (params.beta_I / params.nu_I) * dual_exp(profile, "acute", c)
    chronic = (params.beta_J / params.nu_J) * dual_exp(profile, "chronic", c)
    return params.lambda_influx * (acute + chronic)


def basic_reproduction_number(params: ModelParams, profile: SusceptibilityProfile) -> float:
    """Threshold parameter R0; the infection persists exactly when R0 > 1.

    Example:
        >>> p = ModelParams(1.0, 0.02, 0.5, 0.0, 0.5, 0.1)
        >>> round(basic_reproduction_number(p, make_profile(0.643, 0.156)), 6)
        46.346591
    """
    return _transmission_response(params, profile, 0.0)


def disease_free_equilibrium(params: ModelParams, grid: AgeGrid) -> EquilibriumState:
    """The infection-free stationary state s_F(a) = Lambda * exp(-mu * a)."""
    s = cell_averaged_exponential(params.lambda_influx, params.mu, grid)
    return EquilibriumState(
        s=s,
        big_i=0.0,
        big_j=0.0,
        force=0.0,
        amplitude=params.lambda_influx,
        decay=params.mu,
    )


def endemic_force(params: ModelParams, profile: SusceptibilityProfile) -> float:
    """Endemic force of infection lambda_E, the unique positive root of

        1 = Lambda * sum_k (beta_k / nu_k) p_k*[exp(-(mu + lambda) a)].

    Found by bisection: the right-hand side decreases strictly from R0 > 1 at
    lambda = 0, and lambda_hi = Lambda*(beta_I/nu_I + beta_J/nu_J) forces it
    below 1 because each dual is bounded by 1/lambda.

    Raises:
        NoEndemicEquilibriumError: when R0 <= 1 (no positive root exists).
    """
    r0 = basic_reproduction_number(params, profile)
    if r0 <= 1.0:
        raise NoEndemicEquilibriumError(
            f"no endemic equilibrium: R0={r0:.6g} <= 1 (extinction regime)"
        )
    lo = 0.0
    hi = params.lambda_influx * (params.beta_I / params.nu_I + params.beta_J / params.nu_J)
    # invariant: response(lo) > 1 >= response(hi)
    for _ in range(200):
        if hi - lo <= 2.0 * np.finfo(float).eps * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if _transmission_response(params, profile, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    lam_e = 0.5 * (lo + hi)
    residual = abs(1.0 - _transmission_response(params, profile, lam_e))
    if residual >= 1e-12:
        raise NumericalFailureError(
            f"endemic-force bisection left residual {residual:.3e} at lambda={lam_e!r}"
        )
    return lam_e


def endemic_equilibrium(
    params: ModelParams, profile: SusceptibilityProfile, grid: AgeGrid
) -> EquilibriumState:
    """The endemic stationary state for R0 > 1.

    s_E(a) = Lambda * exp(-(mu + lambda_E) a), I_E = (lambda_E/nu_I) p_I*[s_E],
    J_E = (lambda_E/nu_J) p_J*[s_E]; the construction guarantees the
    self-consistency beta_I*I_E + beta_J*J_E = lambda_E.
    """
    lam_e = endemic_force(params, profile)
    c = params.mu + lam_e
    dual_acute = params.lambda_influx * dual_exp(profile, "acute", c)
    dual_chronic = params.lambda_influx * dual_exp(profile, "chronic", c)
    big_i = lam_e / params.nu_I * dual_acute
    big_j = lam_e / params.nu_J * dual_chronic
    s = cell_averaged_exponential(params.lambda_influx, c, grid)
    return EquilibriumState(
        s=s,
        big_i=big_i,
        big_j=big_j,
        force=lam_e,
        amplitude=params.lambda_influx,
        decay=c,
    )
