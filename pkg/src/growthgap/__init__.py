"""Growth of derivatives of iterated interval diffeomorphisms with a
prescribed modulus of continuity."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConstructionError,
    DomainError,
    GrowthGapError,
    InvalidDiffeoError,
    InvalidModulusError,
    SingularIntegralError,
    SpecError,
)
from .modulus import Modulus, classify_regularity, concave_majorant  # noqa: E402
from .diffeo import Diffeo, from_modulus, identity, moebius_test, paste, sharpness_family  # noqa: E402
from .dynamics import gamma_estimate, growth_sequence, log_deriv_product, orbit  # noqa: E402

__all__ = [
    "__version__",
    "ConstructionError", "DomainError", "GrowthGapError", "InvalidDiffeoError", "InvalidModulusError",
    "SingularIntegralError", "SpecError",
    "Modulus", "classify_regularity", "concave_majorant",
    "Diffeo", "from_modulus", "identity", "moebius_test", "paste", "sharpness_family",
    "gamma_estimate", "growth_sequence", "log_deriv_product", "orbit",
]
