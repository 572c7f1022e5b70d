"""Zero-suppressed state autoencoders and planning in their latent spaces."""
from .ama import ActionAutoEncoder, ActionDiscriminator, LearnedSuccessors, ama1_build, export_pddl
from .exceptions import ZsaeError
from .persistence import load_model, save_model
from .planner import SearchLimits, SearchProblem, astar, solve_instance
from .sae import LossVariant, StateAutoEncoder, find_constant_bits, prune

__version__ = "0.1.0"

__all__ = [
    "ActionAutoEncoder",
    "ActionDiscriminator",
    "LearnedSuccessors",
    "LossVariant",
    "SearchLimits",
    "SearchProblem",
    "StateAutoEncoder",
    "ZsaeError",
    "ama1_build",
    "astar",
    "export_pddl",
    "find_constant_bits",
    "load_model",
    "prune",
    "save_model",
    "solve_instance",
]
