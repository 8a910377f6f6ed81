"""Dual certificates for uniform pricing with i.i.d. shifted-uniform items."""

from .certificates import (
    CertificateReport,
    DOrderedResult,
    WitnessFunction,
    WitnessGap,
    certify,
    convex_dominance_closed_form,
    cylinder_reduction_check,
    d_ordered_check,
    density_difference,
    necessity_witness_gap,
    upper_set_dominance_test,
    upper_set_integral,
)
from .measure import (
    RegionGeometry,
    TransformedMeasure,
    UpperSetStaircase,
    integrate_against_mu,
    push_set_membership,
    pushed_density,
    pushed_density_eval,
    pushforward_face_mass,
    uniform_pricing_utility,
)
