"""Linearized stability certification for the endemic state.

The endemic equilibrium of the chronic-transmission-free branch is linearly
stable exactly when the characteristic function

    Delta(z) = z + K * [ 1/(c (c + z)) - kappa/((c + rate) (c + rate + z)) ],

    K = beta_I^2 * I_E * lambda_influx,   c = mu + lambda_E,

has no root with non-negative real part. The expression above is the exact
partial-fraction form of the defining integral against the exponential
profile; it is rational with poles at -c and -(c + rate), both strictly left
of the analyticity domain {Re z > -mu}, so no removable-singularity handling
is needed anywhere, including z = 0.

Certification is by the argument principle: the winding number of Delta
around the boundary of the rectangle [0, M] x [-M, M] counts roots with
positive real part. M is an a priori root bound derived in
`count_unstable_roots`. The all-acute (kappa = 0) branch reduces to an
explicit quadratic and provides an independent oracle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContourResolutionError,
    InapplicableReductionError,
    ParameterDomainError,
)
from .model import (
    EquilibriumState,
    ModelParams,
    SusceptibilityProfile,
    dual_exp,
    endemic_equilibrium,
)

__all__ = [
    "CharacteristicContext",
    "make_context",
    "delta",
    "kappa0_roots",
    "count_unstable_roots",
    "contour_scan",
    "root_bound",
    "imaginary_axis_margin",
    "LyapunovCondition",
    "lyapunov_condition",
]


@dataclass(frozen=True)
class CharacteristicContext:
    """Everything the characteristic function needs about one endemic state.

    The equilibrium is always taken on the branch with zero chronic
    transmission: the chronic coefficient does not enter the linearization,
    so contexts built from a configuration with beta_J > 0 use the same
    parameters with beta_J forced to zero.
    """

    params: ModelParams
    profile: SusceptibilityProfile
    equilibrium: EquilibriumState

    @property
    def lambda_e(self) -> float:
        return self.equilibrium.force

    @property
    def gain(self) -> float:
        """K = beta_I^2 * I_E * lambda_influx."""
        return self.params.beta_I**2 * self.equilibrium.big_i * self.params.lambda_influx

    @property
    def pole(self) -> float:
        """c = mu + lambda_E."""
        return self.params.mu + self.lambda_e


def make_context(
    params: ModelParams,
    profile: SusceptibilityProfile,
    grid,
) -> CharacteristicContext:
    """Build the characteristic context on the zero-chronic-transmission branch."""
    if params.beta_J != 0.0:
        params = ModelParams(
            lambda_influx=params.lambda_influx,
            mu=params.mu,
            beta_I=params.beta_I,
            beta_J=0.0,
            nu_I=params.nu_I,
            nu_J=params.nu_J,
        )
    eq = endemic_equilibrium(params, profile, grid)
    return CharacteristicContext(params=params, profile=profile, equilibrium=eq)


def delta(ctx: CharacteristicContext, lam: complex) -> complex:
    """Characteristic function at lam; defined for Re(lam) > -mu.

    Uses the exact rational partial-fraction form (module docstring), so the
    value at lam = 0 needs no special casing and conjugate symmetry holds by
    construction.
    """
    lam = complex(lam)
    if lam.real <= -ctx.params.mu:
        raise ParameterDomainError(
            f"characteristic function evaluated outside its domain: Re={lam.real!r} <= -mu"
        )
    c = ctx.pole
    cr = c + ctx.profile.rate
    return lam + ctx.gain * (1.0 / (c * (c + lam)) - ctx.profile.kappa / (cr * (cr + lam)))


def kappa0_roots(ctx: CharacteristicContext) -> tuple[complex, complex]:
    """Both roots of the all-acute reduction, ordered by imaginary part.

    With kappa = 0 the characteristic equation clears denominators to

        (mu + lambda_E) z^2 + (mu + lambda_E)^2 z + beta_I * influx * lambda_E = 0,

    whose two roots always have strictly negative real part (their sum is
    -(mu + lambda_E) < 0 and their product is positive).
    """
    if ctx.profile.kappa != 0.0:
        raise InapplicableReductionError(
            f"quadratic reduction requires an all-acute profile, got kappa={ctx.profile.kappa!r}"
        )
    c = ctx.pole
    a, b, cc = c, c * c, ctx.params.beta_I * ctx.params.lambda_influx * ctx.lambda_e
    disc = cmath.sqrt(complex(b * b - 4.0 * a * cc))
    r1 = (-b - disc) / (2.0 * a)
    r2 = (-b + disc) / (2.0 * a)
    return tuple(sorted((r1, r2), key=lambda z: z.imag))


def _phase_walk(
    fn,
    z_from: complex,
    z_to: complex,
    f_from: complex,
    f_to: complex,
    max_depth: int,
) -> float:
    """Accumulated phase change of fn along a segment, with adaptive bisection.

    Splits until consecutive values differ in phase by less than pi/2, which
    makes the wrapped increment unambiguous. Raises if the recursion depth is
    exhausted (the function nearly vanishes on the contour).
    """
    stack = [(z_from, z_to, f_from, f_to, 0)]
    total = 0.0
    while stack:
        za, zb, fa, fb, depth = stack.pop()
        if fa == 0.0 or fb == 0.0:
            raise ContourResolutionError(
                "characteristic function vanishes on the contour",
                min_abs=0.0,
                location=za if fa == 0.0 else zb,
            )
        inc = cmath.phase(fb / fa)
        if abs(inc) < 0.5 * math.pi:
            total += inc
            continue
        if depth >= max_depth:
            raise ContourResolutionError(
                f"winding quadrature did not resolve after {max_depth} bisections",
                min_abs=min(abs(fa), abs(fb)),
                location=0.5 * (za + zb),
            )
        zm = 0.5 * (za + zb)
        fm = fn(zm)
        stack.append((za, zm, fa, fm, depth + 1))
        stack.append((zm, zb, fm, fb, depth + 1))
    return total


def root_bound(ctx: CharacteristicContext) -> float:
    """A priori bound on |z| for roots with non-negative real part."""
    c = ctx.pole
    dual_acute_eq = ctx.params.lambda_influx * dual_exp(ctx.profile, "acute", c)
    return ctx.params.beta_I * math.sqrt(2.0 * ctx.equilibrium.big_i * dual_acute_eq) + 1.0


def _contour_path(fn, m: float, samples_per_edge: int) -> list[complex]:
    """Counterclockwise rectangle [0, M] x [-M, M] as discrete sample points.

    The left edge descends through z = 0; a small semicircular indentation
    into Re z > 0 is inserted only when |fn(0)| falls below 1e-9, since the
    characteristic function is provably positive there for valid contexts.
    """
    corners = [
        complex(0.0, -m),
        complex(m, -m),
        complex(m, m),
        complex(0.0, m),
    ]
    indent = abs(fn(complex(0.0, 0.0))) < 1e-9
    radius = 1e-6

    path: list[complex] = []

    def add_edge(z_a: complex, z_b: complex) -> None:
        for k in range(samples_per_edge):
            path.append(z_a + (z_b - z_a) * (k / samples_per_edge))

    add_edge(corners[0], corners[1])
    add_edge(corners[1], corners[2])
    add_edge(corners[2], corners[3])
    if not indent:
        add_edge(corners[3], corners[0])
    else:
        # descend to the indentation, arc around 0 through Re > 0, descend on
        add_edge(corners[3], complex(0.0, radius))
        for k in range(samples_per_edge):
            theta = 0.5 * math.pi - math.pi * (k / samples_per_edge)
            path.append(radius * cmath.exp(1j * theta))
        add_edge(complex(0.0, -radius), corners[0])
    path.append(corners[0])
    return path


def contour_scan(
    ctx: CharacteristicContext, samples_per_edge: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Contour sample points and characteristic values, for file emission.

    Returns the same rectangle samples the certification walk starts from
    (complex points array, complex Delta values array). The winding number
    read off these coarse samples is a plot-level quantity; the certified
    count comes from `count_unstable_roots`, which refines edges adaptively.
    """
    fn = lambda z: delta(ctx, z)
    path = _contour_path(fn, root_bound(ctx), samples_per_edge)
    points = np.asarray(path, dtype=complex)
    return points, np.array([fn(z) for z in path], dtype=complex)


def count_unstable_roots(
    ctx: CharacteristicContext,
    char_fn=None,
    bound: float | None = None,
    samples_per_edge: int = 64,
    max_depth: int = 40,
) -> int:
    """Number of characteristic roots with non-negative real part.

    Winding number of the characteristic function around the rectangle
    [0, M] x [-M, M]. The a priori bound M comes from the integral estimate
    |(1 - e^{-z a}) / z| <= 2/|z| on Re z >= 0: any root there satisfies
    |z| <= beta_I * sqrt(2 * I_E * p_acute*[s_E]), and M pads that by +1.
    The imaginary-axis edge would pass through z = 0; since the function is
    provably positive there, an indentation (small semicircle into the right
    half-plane) is inserted only if |Delta(0)| falls below 1e-9.

    `char_fn` and `bound` exist as a test seam: fabricated functions with
    known roots exercise the winding machinery independently of the model.

    Raises:
        ContourResolutionError: adaptive refinement exhausted (a root sits
            on or numerically near the contour).
    """
    fn = char_fn if char_fn is not None else (lambda z: delta(ctx, z))
    if bound is None:
        bound = root_bound(ctx)
    path = _contour_path(fn, float(bound), samples_per_edge)

    values = [fn(z) for z in path]
    total = 0.0
    for idx in range(len(path) - 1):
        total += _phase_walk(
            fn, path[idx], path[idx + 1], values[idx], values[idx + 1], max_depth
        )
    winding = total / (2.0 * math.pi)
    nearest = round(winding)
    if abs(winding - nearest) > 0.1:
        raise ContourResolutionError(
            f"winding number {winding!r} is not within 0.1 of an integer",
            min_abs=min(abs(v) for v in values),
        )
    return int(nearest)


def imaginary_axis_margin(
    ctx: CharacteristicContext, omega_max: float, n_samples: int = 512
) -> float:
    """Minimum over sampled frequencies of the imaginary-part obstruction.

    A purely imaginary root i*omega with omega > 0 would require

        1/((mu+lambda_E)^2 + omega^2) = kappa/((rate+mu+lambda_E)^2 + omega^2),

    impossible because kappa <= 1 and the right denominator is strictly
    larger. The returned margin (left side minus right side, minimized over
    omega in (0, omega_max]) is therefore strictly positive.
    """
    if not (omega_max > 0.0):
        raise ParameterDomainError("omega_max must be positive")
    omega = np.linspace(omega_max / n_samples, omega_max, n_samples)
    c = ctx.pole
    cr = c + ctx.profile.rate
    margins = 1.0 / (c * c + omega * omega) - ctx.profile.kappa / (cr * cr + omega * omega)
    return float(np.min(margins))


# ---------------------------------------------------------------------------
# sufficient condition for the endemic Lyapunov functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovCondition:
    """Verdict and diagnostics of the endemic-monotonicity condition.

    The operative inequality is rate*kappa/(1-kappa) < mu + lambda_E
    (`holds`). A historically displayed alternative form,
    influx*(beta_I/nu_I)*p_acute*[exp(-q a)] < 1 with q = rate*kappa/(1-kappa),
    is evaluated and reported alongside because the two disagree on reference
    data; it never influences the verdict. At kappa = 1 the direct left side
    is infinite (condition fails for any positive rate), and at kappa = 0 the
    displayed form's dual diverges (reported as inf).
    """

    holds: bool
    direct_lhs: float
    direct_rhs: float
    displayed_lhs: float
    displayed_holds: bool


def lyapunov_condition(
    params: ModelParams, profile: SusceptibilityProfile, lambda_e: float
) -> LyapunovCondition:
    """Evaluate the sufficient condition for endemic-functional decrease."""
    rhs = params.mu + lambda_e
    if profile.kappa >= 1.0:
        direct = math.inf
    else:
        direct = profile.rate * profile.kappa / (1.0 - profile.kappa)
    if direct > 0.0 and math.isfinite(direct):
        displayed = (
            params.lambda_influx
            * (params.beta_I / params.nu_I)
            * dual_exp(profile, "acute", direct)
        )
    else:
        # kappa = 0 makes the threshold rate zero and the dual divergent
        displayed = math.inf if direct == 0.0 else 0.0
    return LyapunovCondition(
        holds=direct < rhs,
        direct_lhs=direct,
        direct_rhs=rhs,
        displayed_lhs=displayed,
        displayed_holds=displayed < 1.0,
    )
