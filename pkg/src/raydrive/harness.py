"""Experiment orchestration: config documents, seeded training and eval runs,
metrics CSV, model checkpointing, and episode trace recording.

Every run is fully determined by one JSON config document plus nothing else;
rerunning the same config produces byte-identical metrics and trace files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .agent import (AgentMode, DqnAgent, Hyperparams, PriorityConfig, Transition,
                    VanillaAgent)
from .env import CarEnv, EnvConfig
from .nn import OptimizerState
from .trackmap import TrackSpec, gen_corridor_track, gen_ring_track, parse_trk, serialize_trk


class ConfigInvalid(ValueError):
    """Config document failed validation; the message names the field."""


class EmptyEval(ValueError):
    """Evaluation requested over zero episodes."""


class DivergedNonFinite(RuntimeError):
    """Training produced a non-finite gradient; the run was aborted."""


METRICS_HEADER = "episode,steps,total_reward,epsilon_end,mean_loss,laps,wall_ms"

AGENT_KINDS = ("DQN_ORIGINAL", "DQN_MODIFIED", "VANILLA_NN")


@dataclass(frozen=True)
class OptimizerSettings:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in (nn.SGD, nn.ADAM):
            raise ValueError(f"optimizer.kind must be 'sgd' or 'adam', got {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError(f"optimizer.learning_rate must be > 0, got {self.learning_rate}")

    def build(self) -> OptimizerState:
        return OptimizerState(self.kind, self.learning_rate, self.beta1,
                              self.beta2, self.epsilon)


@dataclass
class MetricsRow:
    episode: int
    steps: int
    total_reward: int
    epsilon_end: float
    mean_loss: float
    laps: int
    wall_ms: int

    def to_csv(self) -> str:
        return (f"{self.episode},{self.steps},{self.total_reward},"
                f"{self.epsilon_end!r},{self.mean_loss!r},{self.laps},{self.wall_ms}")


@dataclass
class ExperimentConfig:
    """One experiment, fully specified. Exactly one of track_path/generator."""

    out_dir: str = "runs/out"
    track_path: str | None = None
    generator: dict | None = None
    env: EnvConfig = field(default_factory=EnvConfig)
    hp: Hyperparams = field(default_factory=Hyperparams)
    agent_kind: str = "DQN_ORIGINAL"
    priority: PriorityConfig = field(default_factory=PriorityConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 0
    episodes: int | None = None  # None -> hp.episodes
    checkpoint_every: int = 50
    trace_episodes: tuple[int, ...] | None = None  # None -> final episode only
    record_wall_time: bool = False  # wall_ms column reads 0 unless enabled
    stream: dict | None = None  # {"port": int, "mode": "live"|"play", "tick_hz": real}

    @property
    def resolved_episodes(self) -> int:
        return self.hp.episodes if self.episodes is None else self.episodes

    @property
    def resolved_trace_episodes(self) -> tuple[int, ...]:
        if self.trace_episodes is None:
            return (self.resolved_episodes - 1,)
        return tuple(self.trace_episodes)

    def validate(self) -> None:
        if (self.track_path is None) == (self.generator is None):
            raise ConfigInvalid("exactly one of 'track_path' or 'generator' is required")
        if self.track_path is not None and not Path(self.track_path).is_file():
            raise ConfigInvalid(f"track_path: no such file: {self.track_path}")
        if self.agent_kind not in AGENT_KINDS:
            raise ConfigInvalid(
                f"agent_kind must be one of {', '.join(AGENT_KINDS)}, got {self.agent_kind!r}")
        if self.resolved_episodes < 1:
            raise ConfigInvalid(f"episodes must be >= 1, got {self.resolved_episodes}")
        if self.checkpoint_every < 1:
            raise ConfigInvalid(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        for ep in self.resolved_trace_episodes:
            if not (0 <= ep < self.resolved_episodes):
                raise ConfigInvalid(
                    f"trace_episodes entry {ep} outside run of {self.resolved_episodes} episodes")
        if self.stream is not None:
            mode = self.stream.get("mode")
            if mode not in ("live", "play"):
                raise ConfigInvalid(f"stream.mode must be 'live' or 'play', got {mode!r}")

    def to_canonical_dict(self) -> dict:
        return {
            "out_dir": self.out_dir,
            "track_path": self.track_path,
            "generator": self.generator,
            "env": dataclasses.asdict(self.env),
            "hp": dataclasses.asdict(self.hp),
            "agent_kind": self.agent_kind,
            "priority": dataclasses.asdict(self.priority),
            "optimizer": dataclasses.asdict(self.optimizer),
            "seed": self.seed,
            "episodes": self.resolved_episodes,
            "checkpoint_every": self.checkpoint_every,
            "trace_episodes": list(self.resolved_trace_episodes),
            "record_wall_time": self.record_wall_time,
            "stream": self.stream,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_canonical_dict(), sort_keys=True,
                          separators=(",", ":"))


def _build_section(name: str, cls, data, transform=None):
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{name}: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigInvalid(f"{name}.{key}: unknown field")
    kwargs = dict(data)
    if transform:
        transform(kwargs)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(f"{name}: {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed JSON. Unknown or
    ill-typed fields raise ConfigInvalid naming the field."""
    if not isinstance(data, dict):
        raise ConfigInvalid(f"config: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigInvalid(f"{key}: unknown field")

    kwargs = dict(data)
    if "env" in kwargs:
        kwargs["env"] = _build_section("env", EnvConfig, kwargs["env"])
    if "hp" in kwargs:
        kwargs["hp"] = _build_section("hp", Hyperparams, kwargs["hp"])
    if "priority" in kwargs:
        def tuplify(kw):
            for key in ("left_sensors", "right_sensors"):
                if key in kw:
                    kw[key] = tuple(kw[key])
        kwargs["priority"] = _build_section("priority", PriorityConfig,
                                            kwargs["priority"], tuplify)
    if "optimizer" in kwargs:
        kwargs["optimizer"] = _build_section("optimizer", OptimizerSettings,
                                             kwargs["optimizer"])
    if "trace_episodes" in kwargs and kwargs["trace_episodes"] is not None:
        kwargs["trace_episodes"] = tuple(kwargs["trace_episodes"])

    try:
        config = ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(str(exc)) from None
    config.validate()
    return config


def config_from_json_file(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise ConfigInvalid(f"config file is not valid JSON: {exc}") from None
    return config_from_dict(data)


def load_track(config: ExperimentConfig) -> tuple[TrackSpec, str]:
    """The track plus its canonical TRK1 text (digest and stream source)."""
    if config.track_path is not None:
        text = Path(config.track_path).read_text(encoding="utf-8")
        return parse_trk(text), text
    gen = dict(config.generator)
    kind = gen.pop("kind", None)
    if kind == "ring":
        track = _call_generator("generator", gen_ring_track, gen)
    elif kind == "corridor":
        track = _call_generator("generator", gen_corridor_track, gen)
    else:
        raise ConfigInvalid(f"generator.kind must be 'ring' or 'corridor', got {kind!r}")
    return track, serialize_trk(track)


def _call_generator(name, fn, kwargs):
    try:
        return fn(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(f"{name}: {exc}") from None


def make_agent(config: ExperimentConfig, net: nn.Mlp, action_seed, buffer_seed):
    if config.agent_kind == "VANILLA_NN":
        return VanillaAgent(net, config.hp, config.optimizer.build(), seed=action_seed)
    mode = AgentMode.MODIFIED if config.agent_kind == "DQN_MODIFIED" else AgentMode.ORIGINAL
    return DqnAgent(net, config.hp, mode, config.priority, config.optimizer.build(),
                    seed=action_seed, buffer_seed=buffer_seed)


def _trace_header(config: ExperimentConfig, trk_text: str) -> str:
    doc = {
        "format": "TRACEv1",
        "track_sha256": hashlib.sha256(trk_text.encode("utf-8")).hexdigest(),
        "config_sha256": hashlib.sha256(config.canonical_json().encode("utf-8")).hexdigest(),
        "seed": config.seed,
        "trk": trk_text,  # embedded so a trace replays standalone
    }
    return json.dumps(doc, separators=(",", ":"))


def _trace_event(steps, pose, action, reward, sensors, epsilon, explored) -> str:
    doc = {
        "t": steps,
        "x": pose.x,
        "y": pose.y,
        "theta": pose.theta,
        "action": int(action),
        "reward": reward,
        "sensors": [float(v) for v in sensors],
        "epsilon": epsilon,
        "explored": explored,
    }
    return json.dumps(doc, separators=(",", ":"))


def run_training(config: ExperimentConfig, on_frame=None) -> dict:
    """Run the full training loop.

    Per episode: reset, then select_action -> env.step -> store/learn ->
    decay_epsilon until terminal. Streams one metrics row per episode
    (file is valid after any episode boundary), saves a checkpoint every
    checkpoint_every episodes plus a final model, and writes JSONL traces
    for the configured episodes. Returns a summary dict of output paths.

    on_frame, when given, receives one dict per environment step (the wire
    frame format) for live streaming.
    """
    config.validate()
    track, trk_text = load_track(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = config.resolved_episodes
    trace_set = set(config.resolved_trace_episodes)

    net_seed, action_seed, buffer_seed = np.random.SeedSequence(config.seed).spawn(3)
    net = nn.init_mlp(net_seed, dims=(config.env.n_sensors, 64, 64, 3))
    agent = make_agent(config, net, action_seed, buffer_seed)
    env = CarEnv(track, config.env)
    trace_header = _trace_header(config, trk_text)

    metrics_path = out_dir / "metrics.csv"
    checkpoint_paths: list[str] = []
    trace_paths: list[str] = []

    with open(metrics_path, "w", encoding="utf-8", newline="") as metrics_file:
        metrics_file.write(METRICS_HEADER + "\n")
        metrics_file.flush()
        for episode in range(episodes):
            started = time.perf_counter() if config.record_wall_time else 0.0
            trace_lines = [trace_header] if episode in trace_set else None
            result = env.reset(seed=config.seed)
            observation = result.observation
            loss_sum = 0.0
            loss_count = 0
            while not result.terminal:
                epsilon_at_selection = agent.epsilon
                action, diag = agent.select_action(observation)
                result = env.step(action)
                transition = Transition(observation, int(action), result.reward,
                                        result.observation, result.terminal,
                                        result.truncated)
                try:
                    loss = agent.experience(transition)
                except nn.NonFiniteGradient as exc:
                    raise DivergedNonFinite(
                        f"episode {episode}, step {result.steps}: {exc}") from exc
                if loss is not None:
                    loss_sum += loss
                    loss_count += 1
                agent.decay_epsilon()
                if trace_lines is not None:
                    trace_lines.append(_trace_event(
                        result.steps, env.state.pose, action, result.reward,
                        result.observation, epsilon_at_selection, diag["explored"]))
                if on_frame is not None:
                    on_frame(_wire_frame(result, env.state.pose, action))
                observation = result.observation

            wall_ms = (int(round((time.perf_counter() - started) * 1000.0))
                       if config.record_wall_time else 0)
            mean_loss = loss_sum / loss_count if loss_count else 0.0
            row = MetricsRow(episode, result.steps, env.state.score, agent.epsilon,
                             mean_loss, env.state.laps, wall_ms)
            metrics_file.write(row.to_csv() + "\n")
            metrics_file.flush()

            if trace_lines is not None:
                trace_path = out_dir / f"trace_ep{episode:05d}.jsonl"
                trace_path.write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
                trace_paths.append(str(trace_path))
            if (episode + 1) % config.checkpoint_every == 0:
                ckpt_path = out_dir / f"ckpt_ep{episode + 1:05d}.json"
                ckpt_path.write_bytes(nn.save_model(agent.main_net))
                checkpoint_paths.append(str(ckpt_path))

    final_path = out_dir / "model_final.json"
    final_path.write_bytes(nn.save_model(agent.main_net))

    return {
        "metrics_path": str(metrics_path),
        "checkpoint_paths": checkpoint_paths,
        "final_model_path": str(final_path),
        "trace_paths": trace_paths,
        "episodes": episodes,
    }


def _wire_frame(result, pose, action) -> dict:
    return {
        "type": "frame",
        "t": result.steps,
        "x": pose.x,
        "y": pose.y,
        "theta": pose.theta,
        "sensors": [float(v) for v in result.observation],
        "action": int(action),
        "reward": result.reward,
        "score": result.score,
        "terminal": result.terminal,
    }


def _resolve_track(track) -> TrackSpec:
    if isinstance(track, TrackSpec):
        return track
    return parse_trk(Path(track).read_text(encoding="utf-8"))


def run_eval(model_path, track, episodes: int, agent_kind: str = "DQN_ORIGINAL",
             seed: int = 0, env_config: EnvConfig | None = None,
             priority: PriorityConfig | None = None) -> dict:
    """Greedy evaluation of a saved model: epsilon forced to 0, no learning,
    no buffer writes. Aggregates rewards, steps and laps over the episodes."""
    if episodes < 1:
        raise EmptyEval(f"episodes must be >= 1, got {episodes}")
    if agent_kind not in AGENT_KINDS:
        raise ConfigInvalid(
            f"agent_kind must be one of {', '.join(AGENT_KINDS)}, got {agent_kind!r}")
    net = nn.load_model(Path(model_path).read_bytes())
    spec = _resolve_track(track)
    env_config = env_config if env_config is not None else EnvConfig()
    if net.in_dim != env_config.n_sensors:
        raise nn.ShapeMismatch(
            f"model expects {net.in_dim} sensors, env provides {env_config.n_sensors}")

    mode = AgentMode.MODIFIED if agent_kind == "DQN_MODIFIED" else AgentMode.ORIGINAL
    if agent_kind == "VANILLA_NN":
        agent = VanillaAgent(net, seed=seed)
    else:
        agent = DqnAgent(net, mode=mode,
                         priority=priority if priority is not None else PriorityConfig(),
                         seed=seed)
    agent.epsilon = 0.0

    env = CarEnv(spec, env_config)
    rewards: list[int] = []
    steps: list[int] = []
    laps = 0
    for _ in range(episodes):
        result = env.reset(seed=seed)
        while not result.terminal:
            action, _ = agent.select_action(result.observation)
            result = env.step(action)
        rewards.append(env.state.score)
        steps.append(env.state.steps_taken)
        laps += env.state.laps
    return {
        "episodes": episodes,
        "mean_reward": sum(rewards) / episodes,
        "max_reward": max(rewards),
        "min_reward": min(rewards),
        "mean_steps": sum(steps) / episodes,
        "laps": laps,
    }


def record_trace(config: ExperimentConfig, episode: int) -> str:
    """Write the JSONL trace for one episode of the configured run by
    re-running it deterministically. Returns the trace file path."""
    if not (0 <= episode < config.resolved_episodes):
        raise ConfigInvalid(
            f"episode {episode} outside run of {config.resolved_episodes} episodes")
    rerun = dataclasses.replace(config, trace_episodes=(episode,))
    summary = run_training(rerun)
    return summary["trace_paths"][0]


def serve_stream(config: ExperimentConfig, session: str) -> None:
    """Blocking stream server for the given session kind ('live' or 'play').
    Thin wrapper over the stream module; see there for the protocol."""
    from . import stream

    config.validate()
    if config.stream is None:
        raise ConfigInvalid("stream: section required to serve")
    _, trk_text = load_track(config)
    port = int(config.stream.get("port", 8765))
    tick_hz = float(config.stream.get("tick_hz", 30.0))
    if session == "play":
        stream.serve_play(trk_text, port=port, tick_hz=tick_hz, env_config=config.env)
    elif session == "live":
        server = stream.StreamServer(trk_text, "live", port=port, tick_hz=tick_hz)
        server.start()
        try:
            summary = run_training(config, on_frame=server.publish_frame)
            server.finish()
            server.wait_forever()
            return summary
        finally:
            server.stop()
    else:
        raise ConfigInvalid(f"session must be 'live' or 'play', got {session!r}")
