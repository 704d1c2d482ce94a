"""Exterior-algebra convexity notions, weak wedge products and a cubical DEC lab."""

from .algebra import (
    ExteriorForm,
    FormTuple,
    format_form,
    hodge_star,
    interior_product,
    parse_form,
    scalar_product,
    wedge,
)
from .dec import Cochain, CubicalGrid, coboundary, codifferential, hodge_decompose, sample_form
from .errors import FormvarError
from .exponents import analyze, mu_vector, parse_exponent
from .integrands import (
    Growth,
    Integrand,
    NormPower,
    PolyconvexComposite,
    QuasiaffineCombo,
    Sampled,
    SumOf,
    evaluate,
    gradient,
    spec_from_dict,
    spec_to_dict,
)
from .wedge_powers import MultiIndexAlpha, big_n, enumerate_alphas, t_vector, tau, wedge_power

__version__ = "0.1.0"
