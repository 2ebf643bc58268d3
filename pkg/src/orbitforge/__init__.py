"""orbitforge: realize finite complex sequences as orbits.

Consistency and classification of candidate orbits, explicit polynomial
realizers for periodic orbits, Taylor germ recovery at accumulation points,
quasiregular necessary conditions and Hölder exponents, and the piecewise
quasiconformal realizer for sequences decaying to zero.
"""

__version__ = "0.1.0"

from .core import (
    ConsistencyReport,
    OrbitClass,
    OrbitSequence,
    Tail,
    ToleranceConfig,
    check_candidate_consistency,
    classify_orbit,
    polynomial_degree_hint,
)

__all__ = [
    "ConsistencyReport",
    "OrbitClass",
    "OrbitSequence",
    "Tail",
    "ToleranceConfig",
    "check_candidate_consistency",
    "classify_orbit",
    "polynomial_degree_hint",
    "__version__",
]
