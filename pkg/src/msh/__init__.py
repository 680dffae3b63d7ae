"""Multi-structure geometric model fitting by mode seeking on hypergraphs."""

from .bench import (
    LabeledDataset,
    SyntheticSpec,
    gen_circles,
    gen_lines,
    load_dataset,
    misclassification_error,
    run_experiment,
)
from .estimator import ModeSeekingHypergraph
from .exceptions import (
    AllZeroWeights,
    Degenerate,
    DegenerateScale,
    DimensionMismatch,
    EmptyHypergraph,
    GenerationExhausted,
    InsufficientPoints,
    MSHError,
    ParseError,
    TooFewVertices,
    ZeroVector,
)
from .geometry import ModelKind, ModelParams, fit_minimal, residual
from .hypergraph import Hypergraph, bandwidth, build_hypergraph, epanechnikov, vertex_weight
from .hypotheses import SamplerConfig, generate_hypotheses, proximity_sample
from .modeseek import (
    FittingResult,
    ModeSet,
    MSHConfig,
    minimum_t_distances,
    msh_fit,
    preference_vector,
    select_modes,
    tanimoto,
    weight_aware_sample,
)
from .scale import ScaleEstimate, ikose

__version__ = "0.1.0"
