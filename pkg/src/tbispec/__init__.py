"""Exact workbench for translational bispectrality of KP solitons.

Builds, from a finitely supported seed distribution c and a kernel
polynomial q, the dressing operator K, the wave function psi, and a
translational-differential operator Lambda in the spectral variable with
psi as an exact eigenfunction; verifies every identity symbolically over
Q(i) and confirms it with an independent floating-point oracle.
"""

from .errors import (
    ConstancyViolation,
    DegenerateSpace,
    EigenCheckFailed,
    InvalidScenario,
    NotFoundWithinBound,
    NotInRing,
    NotLiftable,
    ParseError,
    PoleProximity,
    RootNotRepresentable,
    WorkbenchError,
)
from .exact_algebra import (
    ExpPoly,
    ExpRat,
    Scalar,
    ZPoly,
    ZRat,
    gauge_normalize,
    xp_derive,
    xp_mul,
    zr_shift,
)
from .conditions import (
    ConditionSpace,
    Distribution,
    apply_to_exp,
    build_space,
    compose,
    factor_rational,
    find_ring_poly,
    membership,
    parse_q,
)
from .operator_calculus import (
    DiffOpX,
    TDO,
    Wave,
    build_K,
    build_psi,
    conjugate_by_zpow,
    diffx_rdiv,
    lift,
    simpK,
    tdo_apply,
    tdo_compose,
    wronskian,
)
from .bispectral_pipeline import (
    BispectralCertificate,
    CheckResult,
    PipelineOptions,
    ad_chain,
    build_Gamma,
    build_Khat,
    build_Lambda,
    build_Lp,
    build_Q,
    run_pipeline,
    verify_bdt,
)
from .render import (
    diffop_latex,
    diffop_text,
    parse_diffop,
    parse_tdo,
    tdo_latex,
    tdo_text,
    wave_latex,
    wave_text,
)
from .workbench_cli import (
    Report,
    Scenario,
    demo_scenario,
    main,
    numeric_oracle,
    random_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BispectralCertificate",
    "CheckResult",
    "ConditionSpace",
    "ConstancyViolation",
    "DegenerateSpace",
    "DiffOpX",
    "Distribution",
    "EigenCheckFailed",
    "ExpPoly",
    "ExpRat",
    "InvalidScenario",
    "NotFoundWithinBound",
    "NotInRing",
    "NotLiftable",
    "ParseError",
    "PipelineOptions",
    "PoleProximity",
    "Report",
    "RootNotRepresentable",
    "Scalar",
    "Scenario",
    "TDO",
    "Wave",
    "WorkbenchError",
    "ZPoly",
    "ZRat",
    "ad_chain",
    "apply_to_exp",
    "build_Gamma",
    "build_K",
    "build_Khat",
    "build_Lambda",
    "build_Lp",
    "build_Q",
    "build_psi",
    "build_space",
    "compose",
    "conjugate_by_zpow",
    "demo_scenario",
    "diffop_latex",
    "diffop_text",
    "diffx_rdiv",
    "factor_rational",
    "find_ring_poly",
    "gauge_normalize",
    "lift",
    "main",
    "membership",
    "numeric_oracle",
    "parse_diffop",
    "parse_q",
    "parse_tdo",
    "random_scenario",
    "run_pipeline",
    "simpK",
    "tdo_apply",
    "tdo_compose",
    "tdo_latex",
    "tdo_text",
    "verify_bdt",
    "wave_latex",
    "wave_text",
    "wronskian",
    "xp_derive",
    "xp_mul",
    "zr_shift",
]
