"""Numerical laboratory for a mass-critical convolution-type wave equation
with a focusing power perturbation: conserved functionals, constrained
variational problems, ground states, and split-step time dynamics."""

from .model import Field, GridSpec, ModelParams, load_field, make_gaussian, save_field, validate_params
from .spectral import HartreeMode, SpectralEngine, Spectrum, set_fft_workers, sine_integral
from .functionals import (
    FunctionalReport,
    GNConstants,
    Region,
    ScalingKind,
    apply_scaling,
    classify,
    gn_ratio_hartree,
    gn_ratio_power,
    lambda_derivative_check,
    nehari_lambda,
    pohozaev_residual,
    report,
    scaled_functionals,
    v_zero_lambda,
)
from .groundstate import (
    EquationTag,
    GroundState,
    VariationalEstimates,
    estimate_dN,
    sample_dM,
    solve_R,
    solve_W,
    solve_ground_eq15,
    solve_mass_constrained,
)
from .dynamics import EvolveConfig, Outcome, TrajectoryRecord, evolve, step_strang, virial_monitors

__version__ = "0.1.0"
