"""Fréchet means and weak laws of large numbers on non-compact symmetric spaces."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    PreconditionError,
    SymFrechetError,
    ValidationError,
)
from .frechet import FrechetResult, SolverConfig, frechet_mean, modulation_estimate, shrinkage_check
from .manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Point,
    Product,
    TangentVector,
    distance,
    exp,
    geodesic,
    inner,
    log,
    norm,
    product_space,
)
from .rng import stream
from .sampling import GaussianLaw, RadialLaw, SymmetricSampler, TruncationScheme, truncate
from .symmetry import GeodesicSymmetry, Transvection, apply_symmetry, apply_transvection, displacement_bound_check

__version__ = "0.1.0"

__all__ = [
    "SPD",
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "Euclidean",
    "FrechetResult",
    "GaussianLaw",
    "GeodesicSymmetry",
    "Hyperboloid",
    "Point",
    "PreconditionError",
    "Product",
    "RadialLaw",
    "SolverConfig",
    "SymFrechetError",
    "SymmetricSampler",
    "TangentVector",
    "Transvection",
    "TruncationScheme",
    "ValidationError",
    "apply_symmetry",
    "apply_transvection",
    "displacement_bound_check",
    "distance",
    "exp",
    "frechet_mean",
    "geodesic",
    "inner",
    "log",
    "modulation_estimate",
    "norm",
    "product_space",
    "shrinkage_check",
    "stream",
    "truncate",
]
