"""Finite test spaces and the de Finetti representation of exchangeable states."""
from .core import (
    OutcomeRef,
    TestSpace,
    export_greechie,
    make_classical,
    make_fig1,
    make_process,
    read_space,
    validate,
    write_space,
)
from .statespace import (
    Frame,
    Functional,
    SpanVector,
    State,
    build_frame,
    dimension,
    frame_coordinates,
    inverse_coordinates,
    is_state,
    polytope_constraints,
    random_state,
    unit_functional,
    vertices,
)
from .composite import (
    JointState,
    ProductSpace,
    check_nonsignalling,
    conditional,
    direct_product,
    is_symmetric,
    marginal,
    permute,
    power,
    product,
    symmetrize,
    tensor_coordinates,
    tensor_reconstruct,
)
from .definetti import (
    ClassicalDist,
    Mixture,
    certify_support,
    check_exchangeable,
    condition_on_prefix,
    generate_exchangeable,
    generate_prefix,
    induced_classical,
    posterior_update,
    predictive,
    recover_mixture,
)
from .errors import (
    EmptyStateSpace,
    FrameError,
    InvalidSpace,
    NotSymmetric,
    SignallingState,
    SizeLimitExceeded,
    SpaceParseError,
    ZeroProbabilityObservation,
    ZeroProbabilityOutcome,
)

__version__ = "0.1.0"
