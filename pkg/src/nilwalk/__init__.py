"""Exact group laws, moment-matched measures, and walk experiments on
graded nilpotent groups in exponential coordinates."""

__version__ = "0.1.0"

from .algebra import (
    GradedBasisSpec,
    LieVector,
    StructureConstants,
    ValidationReport,
    dilate,
    validate_algebra,
    zero_vector,
)
from .catalog import CatalogEntry, catalog, get_group, load_algebra_json
from .errors import (
    AlgebraMismatchError,
    ConfigError,
    InvarianceError,
    LayerError,
    MeasureError,
    NilwalkError,
    ResourceError,
    SolveError,
    StructuralError,
)
from .grouplaw import (
    GroupLawTable,
    compiled_law,
    group_law,
    inverse,
    law_from_json,
    law_to_json,
    multiply,
    product,
)
from .measures import (
    BoxUniform,
    Discrete,
    GaussianDiagonal,
    Mixture,
    cramer_check,
    default_box_measure,
    generator_coefficients,
    matched_measure,
    measure_from_json,
    measure_to_json,
    rademacher_measure,
    verify_moment_match,
)
from .montecarlo import (
    ExperimentConfig,
    FrequencyWindow,
    char_fn_estimate,
    lindeberg_gap,
    llt_gap,
    moment_growth,
    sublevel_measure,
    truncation_tail_check,
    walk_functional,
)
from .rng import DEFAULT_SEED, resolve_seed
from .stats import EstimateWithError, loglog_fit
from .sympoly import SparsePolynomial, UStatisticSpec
from .testfn import ProductTestFunction, centered_bump, centered_tent
from .walkpoly import check_product_lemma, expand_product, u_decompose

__all__ = [name for name in dir() if not name.startswith("_")]
