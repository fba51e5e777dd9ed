"""Road roughness estimation from vehicle vibrations."""
from .errors import NumericalError, ValidationError
from .models import (IRI_SPEED, VehicleParams, build_hc, build_qc, discretize, discretize_linear_hold, golden_car_params,
                     identified_car_params, iri_gain)

__all__ = [
    "IRI_SPEED", "NumericalError", "ValidationError", "VehicleParams", "build_hc", "build_qc",
    "discretize", "discretize_linear_hold", "golden_car_params", "identified_car_params", "iri_gain",
]
