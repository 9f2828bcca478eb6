"""eprblab: a laboratory for two-station coincidence experiments.

Simulate time-tagged detection streams for two measurement stations,
match them into coincidence pairs by a greedy nearest-first policy,
tally and test the resulting correlations against Bell-Wigner and CHSH
bounds, enumerate the combinatorics of correlation classes and outcome
domains exactly, and decide by exact rational programming whether a set
of pairwise tables admits a joint probability distribution.
"""

__version__ = "0.1.0"

from .counting import (
    ClassCountReport,
    ConstraintModel,
    CounterfactualTriple,
    Pairing,
    TopologyViolation,
    TopologyViolationKind,
    augment_triple,
    count_domains,
    count_nonlocal_domains,
    count_triple_classes,
    enumerate_eu_classes,
    enumerate_pairings,
    per_trial_patterns,
    setting_grouped_entries,
    validate_time_topology,
)
from .errors import (
    ConfigMismatchError,
    ConfigParseError,
    EmptyCellError,
    EprbLabError,
    FormatError,
    InternalInvariantError,
    InvalidStreamError,
    MalformedTupleError,
    SettingCollisionError,
    SupportViolationError,
    TooLargeError,
)
from .feasibility import (
    FeasibilityResult,
    PairwiseTables,
    joint_feasibility,
    marginalize,
    wigner_residual,
)
from .model import (
    BellTriple,
    CorrelationClass,
    DetectionEvent,
    EventStream,
    PairRecord,
    Setting,
    StreamViolation,
    TallyTable,
    ViolationKind,
    WignerDomainDistribution,
    all_domain_keys,
    domain_key_from_string,
    domain_key_to_string,
    require_valid_stream,
    validate_stream,
)
from .pairing import PairingConfig, match_pairs, match_pairs_indexed, pair_count_curve
from .sources import SourceConfig, generate
from .stats import (
    InequalityReport,
    SweepRow,
    bell_wigner,
    chsh,
    correlation,
    equal_fraction,
    repair_across_trials,
    sweep_window,
    tally,
    tally_indexed,
)

__all__ = [
    "__version__",
    "BellTriple",
    "ClassCountReport",
    "ConfigMismatchError",
    "ConfigParseError",
    "ConstraintModel",
    "CorrelationClass",
    "CounterfactualTriple",
    "DetectionEvent",
    "EmptyCellError",
    "EprbLabError",
    "EventStream",
    "FeasibilityResult",
    "FormatError",
    "InequalityReport",
    "InternalInvariantError",
    "InvalidStreamError",
    "MalformedTupleError",
    "PairRecord",
    "Pairing",
    "PairingConfig",
    "PairwiseTables",
    "Setting",
    "SettingCollisionError",
    "SourceConfig",
    "StreamViolation",
    "SupportViolationError",
    "SweepRow",
    "TallyTable",
    "TooLargeError",
    "TopologyViolation",
    "TopologyViolationKind",
    "ViolationKind",
    "WignerDomainDistribution",
    "all_domain_keys",
    "augment_triple",
    "bell_wigner",
    "chsh",
    "correlation",
    "count_domains",
    "count_nonlocal_domains",
    "count_triple_classes",
    "domain_key_from_string",
    "domain_key_to_string",
    "enumerate_eu_classes",
    "enumerate_pairings",
    "equal_fraction",
    "generate",
    "joint_feasibility",
    "marginalize",
    "match_pairs",
    "match_pairs_indexed",
    "pair_count_curve",
    "per_trial_patterns",
    "repair_across_trials",
    "require_valid_stream",
    "setting_grouped_entries",
    "sweep_window",
    "tally",
    "tally_indexed",
    "validate_stream",
    "validate_time_topology",
    "wigner_residual",
]
