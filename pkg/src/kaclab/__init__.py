"""Simulation and convergence-rate toolkit for one-dimensional Kac-type kinetic models."""

from .datum import (
    Cauchy,
    Gaussian,
    InitialDatum,
    ParetoSymmetric,
    PerturbedQuantile,
    PointMass,
    QuantileTable,
    UniformInterval,
    parse_datum,
)
from .experiments import DecayReport, ExperimentConfig, emit_report, run_experiment
from .finiteness import TailSpec, Verdict, check_finiteness, required_order, steady_tail_spec
from .fixed_point import MixtureLaw, build_pool, moments_recursive, sample_steady, steady_tail_expansion
from .fourier import chi_contraction_measurement, evolve_cf, make_grid, wild_partial_sum
from .kernels import (
    AngleMap,
    CollisionKernel,
    Deterministic,
    Discrete,
    InelasticKac,
    Uniform,
    find_alpha,
    find_p0,
    find_p_bar,
    parse_kernel,
    phi,
    rate_constant,
    s_function,
    spectral_profile,
    validate_h0,
)
from .metrics import (
    DistanceEstimate,
    EmpiricalMeasure,
    decay_fit,
    fourier_distance,
    kolmogorov_distance,
    wasserstein_coupled,
    wasserstein_empirical,
)
from .stable import StableParams, cf_stable, sample_stable, stable_cdf, tail_coefficients
from .wild import WeightArray, simulate_coupled, simulate_v_t

__version__ = "0.1.0"
