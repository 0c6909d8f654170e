"""Grid-world self-driving simulation with ray sensors and a from-scratch
deep Q-learning stack: track model, car environment, dense network, agents,
experiment harness, CLI, and a websocket stream server for the browser viewer.
"""

from .agent import (AgentMode, DqnAgent, Hyperparams, PriorityConfig, ReplayBuffer,
                    TabularQ, Transition, VanillaAgent, bellman_target, priority_boost)
from .env import Action, CarEnv, CarState, EnvConfig, StepResult
from .harness import (ExperimentConfig, config_from_dict, config_from_json_file,
                      record_trace, run_eval, run_training, serve_stream)
from .kernels import active_backend
from .nn import Mlp, OptimizerState, TrainTarget, init_mlp, load_model, save_model
from .trackmap import (Checkpoint, OccupancyGrid, Pose, TrackSpec, gen_corridor_track,
                       gen_ring_track, is_occupied, parse_trk, ray_cast, serialize_trk)

__version__ = "0.1.0"

__all__ = [
    "Action", "AgentMode", "CarEnv", "CarState", "Checkpoint", "DqnAgent",
    "EnvConfig", "ExperimentConfig", "Hyperparams", "Mlp", "OccupancyGrid",
    "OptimizerState", "Pose", "PriorityConfig", "ReplayBuffer", "StepResult",
    "TabularQ", "TrackSpec", "TrainTarget", "Transition", "VanillaAgent",
    "active_backend", "bellman_target", "config_from_dict", "config_from_json_file",
    "gen_corridor_track", "gen_ring_track", "init_mlp", "is_occupied", "load_model",
    "parse_trk", "priority_boost", "ray_cast", "record_trace", "run_eval",
    "run_training", "save_model", "serialize_trk", "serve_stream",
]
