"""Geometry computed from a world function alone.

Everything here starts from sigma(P, Q), half the squared distance between
two points: scalar products, dimension, straightness, parallelism, shapes of
simple objects and, for a distorted space-time, the random shape of a chain
of equal links.
"""
from .core import (
    IntervalClass, Skeleton, Vector, WorldFunction, classify, covariant_coordinates,
    distortion_from_quantum, distortion_map, gram_determinant, gram_matrix, metric_tensor,
    quadratic_sigma, scalar_product, squared_length,
)
from .distorted import (
    BrokenTube, SegmentProfile, WobbleStats, mass_shift, mass_unshift, next_link_solutions,
    segment_profile, segment_radius_closed, segment_radius_numeric, simulate_worldline,
    wobble_statistics,
)
from .envelopes import (
    EnvelopeObject, SampledEnvelope, contains, envelope_value, sample_envelope,
    tube_coincidence_check,
)
from .errors import *  # noqa: F401,F403
from .predicates import (
    DirectionGrid, check_metric_axioms, coordinate_collinear, degeneracy_classify,
    is_collinear, is_parallel_same_direction,
)
from .verify import (
    VerificationReport, check_continuity, check_linear_structure, check_positivity,
    check_symmetry, infer_dimension, verify_euclidean,
)

__version__ = "0.1.0"
