"""Heat kernel, heat semigroup and semilinear mild solutions for the Grushin operator."""

__version__ = "0.1.0"

from .core import (DomainTooSmallError, Field, Grid, GrushinError, HypothesisError, InvalidFieldError,  # noqa: E402
                   ModelParams, NumericalError, Regime, RegimeReport, gaussian, lp_norm, plateau,
                   regime_classify)
from .kernel import KernelQuadrature, kernel_mass, kernel_point, kernel_values  # noqa: E402
from .semigroup import semigroup  # noqa: E402
from .mild_solver import (SolveReport, SolverConfig, confirm_blowup, detect_blowup,  # noqa: E402
                          picard_solve, step_evolve)
from .mc_oracle import McConfig, simulate_paths  # noqa: E402

__all__ = [
    "DomainTooSmallError", "Field", "Grid", "GrushinError", "HypothesisError", "InvalidFieldError",
    "KernelQuadrature", "McConfig", "ModelParams", "NumericalError", "Regime", "RegimeReport",
    "SolveReport", "SolverConfig", "confirm_blowup", "detect_blowup", "gaussian", "kernel_mass",
    "kernel_point", "kernel_values", "lp_norm", "picard_solve", "plateau", "regime_classify",
    "semigroup", "simulate_paths", "step_evolve",
]
