"""Shared fixtures: the desk-scale reference configuration.

The reference configuration (influx 1, mortality 0.02, acute transmission 0.5,
no chronic transmission, exits 0.5 / 0.1, profile 0.643 * exp(-0.156 a),
grid da = 0.05 up to age 400) is used across the suite. Oracle values for it
are derived in the tests that freeze them.
"""

from __future__ import annotations

import pytest

from semiflow_lab.model import ModelParams, make_grid, make_profile


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_params() -> ModelParams:
    return ModelParams(
        lambda_influx=1.0, mu=0.02, beta_I=0.5, beta_J=0.0, nu_I=0.5, nu_J=0.1
    )


@pytest.fixture(scope="session")
def ref_params_perturbed(ref_params) -> ModelParams:
    """Same configuration with a small chronic transmission coefficient."""
    return ModelParams(
        lambda_influx=ref_params.lambda_influx,
        mu=ref_params.mu,
        beta_I=ref_params.beta_I,
        beta_J=0.01,
        nu_I=ref_params.nu_I,
        nu_J=ref_params.nu_J,
    )


@pytest.fixture(scope="session")
def ref_profile():
    return make_profile(0.643, 0.156)


@pytest.fixture(scope="session")
def ref_grid(ref_params):
    # exp(-0.02 * 400) = 3.4e-4, so the reference grid needs the relaxed
    # tail tolerance; the safe default 1e-6 would demand a_max >= 691
    return make_grid(0.05, 400.0, ref_params, truncation_tol=1e-3)
