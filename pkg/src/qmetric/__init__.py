"""Variable-metric nonexpansive operators, fixed-point iterations and PDHG.

The package works with an arbitrary square matrix ``Q`` as the metric,
certificates ``T ∈ F^Q_{xi, alpha}`` and their transformation rules,
sampling-based certification, Banach-Picard / Krasnosel'skii-Mann
iterations with rate-bound checks, metric resolvents and the
primal-dual hybrid gradient method seen as a block metric resolvent.
"""

__version__ = "0.1.0"

from .calculus import (
    Asserted,
    AveragedCertificate,
    Certified,
    CocoercivityCertificate,
    DerivedByRule,
    classify_regime,
    class_from_cocoercive,
    cocoercivity_from_class,
    fclass_gap,
    reflect,
    relax,
    subtract_scaled,
)
from .certify import CertifyReport, PropertyKind, SamplingSpec, certify, certify_equivalences
from .errors import *  # noqa: F401,F403
from .fixed_point import (
    IterationTrace,
    RateBoundReport,
    asymptotic_regularity,
    banach_picard,
    krasnoselskii_mann,
    pointwise_bound,
    qlinear_report,
    reference_fixed_point,
    rlinear_report,
    summability_check,
    trace_to_csv,
)
from .functions import BoxIndicator, Quadratic, ScaledL1
from .metric import Metric, convex_combination_identity_residual, q_dist, q_inner, q_norm_sq
from .operators import Affine, Composition, MapOperator, ProxOfConvex, Reflection, Relaxed, ScaledComplement
from .pdhg import (
    PdhgState,
    SaddleProblem,
    block_resolvent,
    build_block_metric,
    pdhg_resolvent_equivalence,
    pdhg_run,
    pdhg_step,
    saddle_point,
    stacked_inclusion_residual,
)
from .resolvent import (
    AffineMonotone,
    ResolventHandle,
    ScaledStrong,
    Subdifferential,
    complement_certificate,
    ppa,
    resolvent_apply,
    resolvent_certificate,
    rppa,
)
