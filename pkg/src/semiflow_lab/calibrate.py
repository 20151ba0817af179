"""Least-squares calibration of the chronicity profile.

Fits the prototype form kappa * exp(-rate * a) to (age, probability) samples:

  * a published two-parameter-exponent curve kappa1 * exp(-r1 * a^s1) serves
    as the reference generator for calibration experiments;
  * initialization is a log-linear regression when every sample value is
    positive, otherwise a deterministic coarse grid search;
  * refinement is damped Gauss-Newton with step halving, the fitted kappa
    projected onto [0, 1] after every update.

Sample files are two-column numeric text (age, value); lines starting with
'#' are comments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitDataError, ParameterDomainError

__all__ = [
    "FitResult",
    "edmunds_reference",
    "fit_exponential",
    "load_samples",
]

GRADIENT_TOL = 1e-10
MAX_ITERATIONS = 200
MAX_HALVINGS = 30
RATE_FLOOR = 1e-12
RATE_CONVERGED_MIN = 1e-8


# ---------------------------------------------------------------------------
# reference curve and result container
# ---------------------------------------------------------------------------

def edmunds_reference(a, kappa1: float, r1: float, s1: float):
    """Evaluate the reference chronicity curve kappa1 * exp(-r1 * a^s1).

    Args:
        a: age or array of ages, all >= 0.
        kappa1: scale in [0, 1].
        r1: decay coefficient, > 0.
        s1: age exponent, > 0; s1 = 1 reduces to the prototype form.
    """
    if not (0.0 <= kappa1 <= 1.0):
        raise ParameterDomainError(f"kappa1 must lie in [0, 1], got {kappa1}")
    if not (r1 > 0.0 and s1 > 0.0):
        raise ParameterDomainError("r1 and s1 must be positive")
    ages = np.asarray(a, dtype=float)
    if np.any(ages < 0.0):
        raise ParameterDomainError("ages must be non-negative")
    values = kappa1 * np.exp(-r1 * np.power(ages, s1))
    return values if values.ndim else float(values)


@dataclass(frozen=True)
class FitResult:
    """Outcome of one exponential fit.

    `converged` means the iteration stopped at a stationary point: either
    the gradient norm fell below tolerance, or the damped step stalled at
    floating-point resolution of the residual (for fits with nonzero
    residual the absolute gradient tolerance is unreachable in doubles).
    A fitted rate at the r -> 0+ boundary (below 1e-8) is never reported
    converged; there the exponential family degenerates to a constant.
    """

    kappa: float
    rate: float
    sse: float
    iterations: int
    converged: bool

    def __post_init__(self):
        if not (0.0 <= self.kappa <= 1.0):
            raise ParameterDomainError(f"fitted kappa outside [0, 1]: {self.kappa}")
        if not (self.rate > 0.0 and self.sse >= 0.0):
            raise ParameterDomainError("fitted rate must be positive, sse non-negative")


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _sse(kappa: float, rate: float, ages: np.ndarray, values: np.ndarray) -> float:
    residual = kappa * np.exp(-rate * ages) - values
    return float(residual @ residual)


def _log_linear_init(ages: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares line through (age, ln value): slope -rate, intercept ln kappa."""
    coeffs = np.polynomial.polynomial.polyfit(ages, np.log(values), 1)
    kappa = min(1.0, max(0.0, float(np.exp(coeffs[0]))))
    rate = max(RATE_FLOOR, -float(coeffs[1]))
    return kappa, rate


def _grid_init(ages: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Deterministic coarse argmin over kappa in [0,1] x rate in (0,5]."""
    best = (0.5, 1.0)
    best_sse = np.inf
    for kappa in np.linspace(0.0, 1.0, 21):
        for rate in np.linspace(0.05, 5.0, 100):
            sse = _sse(float(kappa), float(rate), ages, values)
            if sse < best_sse:
                best_sse = sse
                best = (float(kappa), float(rate))
    return best


def fit_exponential(samples) -> FitResult:
    """Fit kappa * exp(-rate * a) to samples by damped Gauss-Newton.

    Args:
        samples: sequence of (age, value) pairs or an (n, 2) array; at least
            three samples with distinct non-negative ages and values <= 1.
            Non-positive values are tolerated (they only force the grid
            initialization); values above 1 are rejected since the curve is
            a probability.

    Returns:
        FitResult with kappa projected onto [0, 1].

    Raises:
        FitDataError: fewer than three samples, duplicate or negative ages,
            values above 1, or non-finite entries.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitDataError("samples must form an (n, 2) table of (age, value)")
    if data.shape[0] < 3:
        raise FitDataError(f"need at least 3 samples, got {data.shape[0]}")
    if not np.all(np.isfinite(data)):
        raise FitDataError("samples contain non-finite entries")
    ages = data[:, 0]
    values = data[:, 1]
    if np.any(ages < 0.0):
        raise FitDataError("ages must be non-negative")
    if np.unique(ages).size != ages.size:
        raise FitDataError("ages must be distinct; repeated abscissae are rank-deficient")
    if np.any(values > 1.0):
        raise FitDataError("values above 1 are not probabilities")

    if np.all(values > 0.0):
        kappa, rate = _log_linear_init(ages, values)
    else:
        kappa, rate = _grid_init(ages, values)
    sse = _sse(kappa, rate, ages, values)

    iterations = 0
    stationary = False
    for iterations in range(1, MAX_ITERATIONS + 1):
        basis = np.exp(-rate * ages)
        residual = kappa * basis - values
        jac = np.column_stack([basis, -kappa * ages * basis])
        gradient = jac.T @ residual
        if float(np.hypot(gradient[0], gradient[1])) < GRADIENT_TOL:
            stationary = True
            break
        normal = jac.T @ jac
        try:
            delta = np.linalg.solve(normal, -gradient)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial_kappa = min(1.0, max(0.0, kappa + scale * float(delta[0])))
            trial_rate = max(RATE_FLOOR, rate + scale * float(delta[1]))
            trial_sse = _sse(trial_kappa, trial_rate, ages, values)
            if trial_sse < sse:
                kappa, rate, sse = trial_kappa, trial_rate, trial_sse
                break
            scale *= 0.5
        else:
            # The Gauss-Newton direction is a descent direction, so a stall
            # across all halvings means the residual cannot be improved at
            # floating-point resolution: the iterate sits at the minimum.
            stationary = True
            break

    converged = stationary and rate > RATE_CONVERGED_MIN
    return FitResult(
        kappa=kappa, rate=rate, sse=sse, iterations=iterations, converged=converged
    )


# ---------------------------------------------------------------------------
# sample files
# ---------------------------------------------------------------------------

def load_samples(path) -> np.ndarray:
    """Read an (n, 2) sample table from two-column text with '#' comments."""
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise FitDataError(f"cannot read samples from {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise FitDataError(
            f"expected two columns (age, value), found {data.shape[1]} in {path}"
        )
    return data
