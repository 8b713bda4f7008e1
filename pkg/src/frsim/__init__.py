"""Simulator for extended Wigner's-friend scenarios."""

from .correlations import TSIRELSON, DichotomicObservable, chsh, correlation, tsirelson_sweep
from .dsl import ParseDiagnostic, load_scenario, parse_scenario, serialize_scenario
from .errors import (
    DimensionError,
    FrsimError,
    ImpossibleEventError,
    NonCommutingError,
    NotOrthonormalError,
    ParseError,
    SearchGuardError,
    StructureError,
    SystemMismatchError,
)
from .frames import (
    Frame,
    ValuationResult,
    consistency_report,
    fr_contradiction_report,
    frame_from_commuting,
    frame_from_observables,
    global_valuation,
    intertwinement,
    possibilistic_constraints,
)
from .linalg import OperatorMatrix, Projector, PureState, SystemSpec, apply, expand, tensor
from .measurement import (
    Distribution,
    Observable,
    born_distribution,
    conditionalize,
    joint_distribution,
    no_signaling_audit,
    sample,
)
from .render import render
from .scenario import (
    Scenario,
    ensemble_distribution,
    event_probability,
    fr_scenario,
    run_deterministic,
    sample_runs,
    singlet_scenario,
)

__version__ = "0.1.0"
