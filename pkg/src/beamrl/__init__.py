"""Multi-user massive-MIMO downlink beam selection under channel aging.

Core pieces: a seeded geometric channel simulator with Gauss-Markov
aging, codebook beam selection driven by multi-agent deep Q-learning
(per-stream / per-user / central topologies), classical baselines
(zero-forcing, sample-and-hold, greedy sweep, random), and an experiment
harness.  A FastAPI service (`beamrl.service`) exposes runs as jobs; the
CLI (`beamrl.cli`) is a thin client over the same entry points.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, desk_profile, load_config
from .harness import run_experiment
from .numerics import RngStream

__all__ = [
    "ExperimentConfig",
    "desk_profile",
    "load_config",
    "run_experiment",
    "RngStream",
    "__version__",
]
