"""Robust learning-augmented online bipartite matching."""

from .experts import GREEDY, OSM, ExpertKind, greedy_decide, osm_decide, run_expert
from .instance import (
    UNBOUNDED,
    GeneratorConfig,
    ProblemInstance,
    generate_instance,
    generate_instances,
    load_instances,
    save_instances,
    validate,
)
from .matching import FD, NFD, SKIP, MatchLedger, Setting, apply_decision, delta_f, f_value, top_set
from .oracle import OptResult, opt_exhaustive, opt_flow
from .policy import PolicyParams, PolicyProposer, TrainConfig, init_params, load_policy, save_policy, train
from .switching import (
    AdversarialProposer,
    RandomProposer,
    RunTrace,
    ScriptedProposer,
    SwitchConfig,
    run_episode,
)
from .engine import simulate

__version__ = "0.1.0"

__all__ = [
    "GREEDY", "OSM", "ExpertKind", "greedy_decide", "osm_decide", "run_expert",
    "UNBOUNDED", "GeneratorConfig", "ProblemInstance", "generate_instance", "generate_instances",
    "load_instances", "save_instances", "validate",
    "FD", "NFD", "SKIP", "MatchLedger", "Setting", "apply_decision", "delta_f", "f_value", "top_set",
    "OptResult", "opt_exhaustive", "opt_flow",
    "PolicyParams", "PolicyProposer", "TrainConfig", "init_params", "load_policy", "save_policy", "train",
    "AdversarialProposer", "RandomProposer", "RunTrace", "ScriptedProposer", "SwitchConfig", "run_episode",
    "simulate",
]
