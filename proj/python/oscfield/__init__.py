"""Spatio-temporal resonator fields.

Spectral state-space models for oscillatory space-time data: truncated
Laplacian eigenbases over intervals, rectangles, disks, and spheres; exact
block discretization; square-root Kalman smoothing; and marginal-likelihood
hyperparameter fitting. The heavy lifting lives in the compiled `_core`
extension; this package just re-exports its public names.
"""

from oscfield._core import (
    Basis,
    Component,
    ConfigurationError,
    DataFormatError,
    Domain,
    FitReport,
    Kernel,
    Model,
    NumericsError,
    Observations,
    Posterior,
    Schedule,
    amplitude_maps,
    build_basis,
    data_derived_template,
    dump_model,
    field_from_states,
    fit,
    grid_points,
    load_model,
    loglik,
    predict,
    read_observations,
    scattered_times_and_locations,
    simulate,
    smooth,
    spectral_density,
    write_observations,
)

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "Component",
    "ConfigurationError",
    "DataFormatError",
    "Domain",
    "FitReport",
    "Kernel",
    "Model",
    "NumericsError",
    "Observations",
    "Posterior",
    "Schedule",
    "amplitude_maps",
    "build_basis",
    "data_derived_template",
    "dump_model",
    "field_from_states",
    "fit",
    "grid_points",
    "load_model",
    "loglik",
    "predict",
    "read_observations",
    "scattered_times_and_locations",
    "simulate",
    "smooth",
    "spectral_density",
    "write_observations",
]
