"""Closed-loop multiobjective optimization of a simulated flow-chemistry lab."""
from .acquisition import (
    AcquisitionSpec,
    ArchiveEntry,
    ParetoArchive,
    generate_batch,
    pareto_update,
    scalarize_epsilon,
    scalarize_fixed,
)
from .controller import Campaign, CampaignConfig, CampaignState, StoppingRule, check_stop
from .doe import LhsConfig, latin_hypercube
from .optimize import GpsConfig, pattern_search
from .problem import (
    REACTOR_VARIABLES,
    DesignPoint,
    SimulationOutput,
    VariableSpec,
    embed,
    evaluate_objectives,
    unembed,
)
from .surrogate import RbfModel, fit, predict, refit

__version__ = "0.1.0"
