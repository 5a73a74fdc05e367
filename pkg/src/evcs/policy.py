"""Linear Gaussian policy over aggregated station features, trained by
score-function gradient ascent on reward-to-go estimates.

The policy draws a continuous total action from a Gaussian whose mean is
linear in the (standardized) feature vector [price, n_0, ..., n_L]; the
environment-side projection rounds it and clamps it into the feasible range
[zero-laxity count, parked count].  Gradients always use the raw sample, so
the estimator stays unbiased for the Gaussian the math assumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agg import AggSimulator, AggState, cap_merge
from .env import EpisodeConfig


class DivergenceError(RuntimeError):
    """Raised when training parameters blow past the configured bound."""


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Linear Gaussian policy: action ~ N(weights . features + bias, sigma^2)."""

    weights: np.ndarray
    bias: float
    sigma: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError(f"weights must be a vector, got shape {w.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def as_vector(self) -> np.ndarray:
        """Flat [weights..., bias] view used by updates and traces."""
        return np.append(self.weights, self.bias)


def policy_mean(params: PolicyParams, features: Sequence[float]) -> float:
    f = np.asarray(features, dtype=float)
    if f.shape != params.weights.shape:
        raise ValueError(
            f"feature dimension {f.shape} does not match weights "
            f"{params.weights.shape}"
        )
    return float(params.weights @ f + params.bias)


def sample_action(
    params: PolicyParams, features: Sequence[float], rng: np.random.Generator
) -> float:
    """Draw one continuous action: mean plus sigma-scaled standard normal."""
    return policy_mean(params, features) + params.sigma * rng.standard_normal()


def project_action(raw: float, chargeable: int, urgent: int = 0) -> int:
    """Round the raw action and clamp it into [urgent, chargeable].

    The lower bound is the zero-laxity count: those EVs must charge now or
    become impossible to finish.
    """
    if not 0 <= urgent <= chargeable:
        raise ValueError(
            f"need 0 <= urgent <= chargeable, got urgent={urgent}, "
            f"chargeable={chargeable}"
        )
    rounded = math.floor(raw + 0.5)
    return min(max(rounded, urgent), chargeable)


def log_prob_grad(
    params: PolicyParams, features: Sequence[float], action: float
) -> np.ndarray:
    """Gradient of ln N(action | mean, sigma^2) in [weights..., bias] order."""
    f = np.asarray(features, dtype=float)
    z = (action - policy_mean(params, f)) / params.sigma**2
    return np.append(z * f, z)


def estimate_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Reward-to-go at every step: returns[t] = sum_{u>=t} gamma^(u-t) r_u."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("cannot estimate returns of an empty trajectory")
    out = np.empty_like(r)
    acc = 0.0
    for t in range(r.size - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def normalize_returns(returns: Sequence[float]) -> np.ndarray:
    """Center and scale to unit standard deviation (population convention).

    A constant input (including a single entry) has no scale and maps to
    zeros, which keeps degenerate trajectories from producing gradients.
    """
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise ValueError("cannot normalize an empty return vector")
    std = float(r.std())
    if std == 0.0 or not math.isfinite(std):
        return np.zeros_like(r)
    return (r - r.mean()) / std


@dataclass(frozen=True)
class TrajectoryStep:
    """One slot as the policy saw it: features, raw and applied action, reward."""

    features: np.ndarray
    raw_action: float
    applied_action: int
    reward: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=float)

    @property
    def episode_reward(self) -> float:
        return float(self.rewards.sum()) if self.steps else 0.0


def estimate_gradient(
    trajectories: Sequence[Trajectory],
    params: PolicyParams,
    gamma: float,
    normalization: str = "episode",
) -> np.ndarray:
    """Score-function gradient estimate averaged over a batch of trajectories.

    Per trajectory: sum_t normalized-return[t] * grad log pi(raw_action[t]).
    ``normalization`` is "episode" (each trajectory's reward-to-go normalized
    on its own) or "batch" (one mean/std shared across the batch).
    """
    if not trajectories:
        raise ValueError("cannot estimate a gradient from an empty batch")
    if normalization not in ("episode", "batch"):
        raise ValueError(f"unknown normalization {normalization!r}")

    per_traj_returns = [estimate_returns(traj.rewards, gamma) for traj in trajectories]
    if normalization == "batch":
        pooled = np.concatenate(per_traj_returns)
        std = float(pooled.std())
        mean = float(pooled.mean())
        if std == 0.0:
            per_traj_returns = [np.zeros_like(q) for q in per_traj_returns]
        else:
            per_traj_returns = [(q - mean) / std for q in per_traj_returns]
    else:
        per_traj_returns = [normalize_returns(q) for q in per_traj_returns]

    grad = np.zeros(params.dim + 1)
    for traj, q in zip(trajectories, per_traj_returns):
        features = np.array([step.features for step in traj.steps])
        raws = np.array([step.raw_action for step in traj.steps])
        means = features @ params.weights + params.bias
        weighted = q * (raws - means) / params.sigma**2
        grad[:-1] += features.T @ weighted
        grad[-1] += weighted.sum()
    return grad / len(trajectories)


def pg_update(
    params: PolicyParams, gradient: Sequence[float], step_size: float
) -> PolicyParams:
    """Gradient-ascent step on [weights..., bias]; sigma is left alone."""
    if not step_size > 0:
        raise ValueError(f"step size must be positive, got {step_size}")
    g = np.asarray(gradient, dtype=float)
    if g.shape != (params.dim + 1,):
        raise ValueError(
            f"gradient must have length {params.dim + 1}, got {g.shape}"
        )
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    return PolicyParams(
        weights=params.weights + step_size * g[:-1],
        bias=params.bias + step_size * g[-1],
        sigma=params.sigma,
    )


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Per-feature standardization constants fitted on the training set.

    Standard deviations are floored at 1.0: rarely-populated laxity levels
    otherwise get near-zero scale and their standardized features explode.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=float))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be vectors of equal length")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, raw: Sequence[float]) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.mean) / self.std

    @classmethod
    def fit(cls, rows: Sequence[Sequence[float]], std_floor: float = 1.0) -> "FeatureScaler":
        m = np.asarray(rows, dtype=float)
        return cls(mean=m.mean(axis=0), std=np.maximum(m.std(axis=0), std_floor))

    @classmethod
    def identity(cls, dim: int) -> "FeatureScaler":
        return cls(mean=np.zeros(dim), std=np.ones(dim))


def destandardize(params: PolicyParams, scaler: FeatureScaler) -> PolicyParams:
    """Fold the standardization into the weights: same mean action on raw features."""
    w = params.weights / scaler.std
    b = params.bias - float(np.sum(params.weights * scaler.mean / scaler.std))
    return PolicyParams(weights=w, bias=b, sigma=params.sigma)


def raw_features(state: AggState, action_cap: int | None = None) -> np.ndarray:
    """Feature vector [price, counts...], optionally with high levels pooled."""
    view = state if action_cap is None else cap_merge(state, action_cap)
    return np.array([view.price, *view.counts], dtype=float)


def feature_dim(max_laxity: int, level_cap: int | None = None) -> int:
    levels = max_laxity if level_cap is None else min(level_cap, max_laxity)
    return levels + 2


def run_policy_episode(
    config: EpisodeConfig,
    params: PolicyParams,
    scaler: FeatureScaler,
    max_laxity: int,
    level_cap: int | None = None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Roll one day under the policy; ``rng=None`` runs the deterministic mean."""
    sim = AggSimulator(config, max_laxity)
    state = sim.reset()
    steps = []
    for _ in range(config.horizon):
        features = scaler.transform(raw_features(state, level_cap))
        if rng is None:
            raw = policy_mean(params, features)
        else:
            raw = sample_action(params, features, rng)
        action = project_action(raw, sim.chargeable, sim.urgent)
        state, reward = sim.step(action)
        steps.append(TrajectoryStep(features, raw, action, reward))
    return Trajectory(tuple(steps))


def fit_scaler(
    day_configs: Sequence[EpisodeConfig],
    max_laxity: int,
    level_cap: int | None = None,
) -> FeatureScaler:
    """Fit standardization constants from urgent-only rollouts of the training days."""
    rows = []
    for config in day_configs:
        sim = AggSimulator(config, max_laxity)
        state = sim.reset()
        for _ in range(config.horizon):
            rows.append(raw_features(state, level_cap))
            state, _ = sim.step(sim.urgent)
    if not rows:
        return FeatureScaler.identity(feature_dim(max_laxity, level_cap))
    return FeatureScaler.fit(rows)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the gradient-ascent training loop."""

    step_size: float
    iterations: int
    batch: int = 1
    discount: float = 1.0
    sigma_decay: float = 1.0
    sigma_min: float = 1e-2
    step_decay: float = 1.0
    seed: int = 0
    convergence_tol: float = 1e-4
    convergence_window: int = 10
    divergence_bound: float = 1e6
    return_normalization: str = "episode"

    def __post_init__(self) -> None:
        if self.step_size < 0:
            raise ValueError(f"step size must be >= 0, got {self.step_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        if not 0 < self.sigma_decay <= 1:
            raise ValueError(f"sigma decay must be in (0, 1], got {self.sigma_decay}")
        if not 0 < self.step_decay <= 1:
            raise ValueError(f"step decay must be in (0, 1], got {self.step_decay}")


@dataclass
class TrainResult:
    params: PolicyParams
    scaler: FeatureScaler
    curve: np.ndarray        # mean episode reward per iteration
    param_trace: np.ndarray  # per iteration: [weights..., bias, sigma]
    iterations_run: int
    converged: bool


def train(
    day_configs: Sequence[EpisodeConfig],
    initial_params: PolicyParams,
    config: TrainConfig,
    max_laxity: int,
    level_cap: int | None = None,
    scaler: FeatureScaler | None = None,
) -> TrainResult:
    """Gradient-ascent policy search over the training days.

    Each iteration rolls out a round-robin window of ``batch`` days with
    per-trajectory RNG streams spawned from the seed, averages their
    score-function gradients, and steps the parameters.  Stops early once the
    relative parameter change stays under ``convergence_tol`` for
    ``convergence_window`` consecutive iterations.
    """
    if not day_configs:
        raise ValueError("need at least one training day")
    if scaler is None:
        scaler = fit_scaler(day_configs, max_laxity, level_cap)
    if scaler.dim != initial_params.dim:
        raise ValueError(
            f"scaler dimension {scaler.dim} does not match policy dimension "
            f"{initial_params.dim}"
        )

    seed_root = np.random.SeedSequence(config.seed)
    params = initial_params
    n_days = len(day_configs)
    step_size = config.step_size
    curve = []
    trace = []
    quiet_streak = 0
    converged = False
    iterations_run = 0

    for iteration in range(config.iterations):
        day_idx = [
            (iteration * config.batch + j) % n_days for j in range(config.batch)
        ]
        child_seeds = seed_root.spawn(len(day_idx))
        trajectories = [
            run_policy_episode(
                day_configs[i],
                params,
                scaler,
                max_laxity,
                level_cap,
                rng=np.random.default_rng(child),
            )
            for i, child in zip(day_idx, child_seeds)
        ]
        gradient = estimate_gradient(
            trajectories, params, config.discount, config.return_normalization
        )
        old_vec = params.as_vector()
        if step_size > 0:
            params = pg_update(params, gradient, step_size)
        step_size *= config.step_decay
        new_sigma = max(params.sigma * config.sigma_decay, config.sigma_min)
        params = PolicyParams(params.weights, params.bias, new_sigma)

        curve.append(float(np.mean([t.episode_reward for t in trajectories])))
        trace.append(np.append(params.as_vector(), params.sigma))
        iterations_run = iteration + 1

        new_vec = params.as_vector()
        norm = float(np.linalg.norm(new_vec))
        if not np.isfinite(norm) or norm > config.divergence_bound:
            raise DivergenceError(
                f"parameter norm {norm:.3g} exceeded the divergence bound "
                f"{config.divergence_bound:.3g} at iteration {iteration}"
            )
        rel_change = float(np.linalg.norm(new_vec - old_vec)) / max(
            1.0, float(np.linalg.norm(old_vec))
        )
        quiet_streak = quiet_streak + 1 if rel_change < config.convergence_tol else 0
        if quiet_streak >= config.convergence_window:
            converged = True
            break

    return TrainResult(
        params=params,
        scaler=scaler,
        curve=np.array(curve),
        param_trace=np.array(trace),
        iterations_run=iterations_run,
        converged=converged,
    )


def evaluate_policy(
    config: EpisodeConfig,
    params: PolicyParams,
    scaler: FeatureScaler,
    max_laxity: int,
    level_cap: int | None = None,
) -> tuple[float, tuple[int, ...]]:
    """Deterministic (mean-action) evaluation: total reward and per-slot actions."""
    traj = run_policy_episode(config, params, scaler, max_laxity, level_cap, rng=None)
    return traj.episode_reward, tuple(s.applied_action for s in traj.steps)


# --- model files -----------------------------------------------------------

MODEL_KIND_PG = "pg"


def pg_model_dict(
    params: PolicyParams,
    scaler: FeatureScaler,
    max_laxity: int,
    level_cap: int | None,
    config_hash: str = "",
) -> dict:
    return {
        "algo": MODEL_KIND_PG,
        "weights": [float(w) for w in params.weights],
        "bias": float(params.bias),
        "sigma": float(params.sigma),
        "feature_mean": [float(v) for v in scaler.mean],
        "feature_std": [float(v) for v in scaler.std],
        "max_laxity": int(max_laxity),
        "level_cap": None if level_cap is None else int(level_cap),
        "config_hash": config_hash,
    }


def pg_from_model(model: dict) -> tuple[PolicyParams, FeatureScaler, int, int | None]:
    params = PolicyParams(
        weights=np.array(model["weights"], dtype=float),
        bias=model["bias"],
        sigma=model["sigma"],
    )
    scaler = FeatureScaler(
        mean=np.array(model["feature_mean"], dtype=float),
        std=np.array(model["feature_std"], dtype=float),
    )
    return params, scaler, int(model["max_laxity"]), model.get("level_cap")


def save_model(path: str | Path, model: dict) -> None:
    """Write a model as canonical JSON (sorted keys, exact float round-trip)."""
    Path(path).write_text(json.dumps(model, sort_keys=True, indent=2) + "\n")


def load_model(path: str | Path) -> dict:
    model = json.loads(Path(path).read_text())
    if "algo" not in model:
        raise ValueError(f"{path}: not a model file (missing 'algo' field)")
    return model
