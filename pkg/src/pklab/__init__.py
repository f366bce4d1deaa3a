"""Numerical toolkit around the Poincare-Korn constant of a probability measure."""

__version__ = "0.1.0"

from .measure import (  # noqa: E402
    MarginalSpec,
    QuadratureMeasure,
    build_gauss_hermite,
    build_product,
    check_moments,
    max_delta_h6,
)
from .spectral import cpk_lower_bound  # noqa: E402
from .specs import parse_measure_spec  # noqa: E402
from .zolotarev import stability_report, zol2_lower  # noqa: E402

__all__ = [
    "MarginalSpec",
    "QuadratureMeasure",
    "build_gauss_hermite",
    "build_product",
    "check_moments",
    "max_delta_h6",
    "cpk_lower_bound",
    "parse_measure_spec",
    "stability_report",
    "zol2_lower",
]
