"""Numerical laboratory for an aggregated age-structured transmission model.

Subpackages by concern:
  model      - domain types, duals, R0, equilibria
  simulate   - characteristics-based time stepping and monitors
  spectral   - characteristic function and root certification
  lyapunov   - extinction / endemic functionals and monotonicity reports
  calibrate  - exponential-profile least-squares fitting
  sweep      - perturbation and extinction experiments
  config     - structured text config parsing
  runner     - command dispatch producing deterministic files
  service    - HTTP facade (FastAPI) around the runner
  cli        - thin client binary `semiflow-lab`
"""

__version__ = "0.1.0"
