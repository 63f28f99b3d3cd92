"""Seeded Garnet random MDPs.

Randomness comes from the Philox-4x64 counter-based generator keyed by the
seed.  Stream ``k`` starts at counter ``(0, 0, 0, k)``: stream
``s * n_actions + a`` draws kernel row ``(s, a)`` and stream
``n_states * n_actions`` draws the rewards, so every row is reproducible on
its own and generation order never matters.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .mdp import MdpModel, dumps_model, validate_model


class RewardLaw(str, enum.Enum):
    GAUSSIAN_NORMALIZED = "gaussian"
    UNIFORM01 = "uniform"


@dataclass(frozen=True)
class GarnetConfig:
    n_states: int = 20
    n_actions: int = 30
    seed: int = 0
    smoothing: float = 0.0
    reward_law: RewardLaw = RewardLaw.GAUSSIAN_NORMALIZED
    branching: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "reward_law", RewardLaw(self.reward_law))
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be positive")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.branching is not None and not 1 <= self.branching <= self.n_states:
            raise ValueError("branching must lie in [1, n_states]")


def stream(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, k]))


def _row(cfg: GarnetConfig, k: int) -> np.ndarray:
    rng = stream(cfg.seed, k)
    S = cfg.n_states
    row = np.zeros(S)
    if cfg.branching is None:
        e = rng.standard_exponential(S)
        row[:] = e / e.sum()
    else:
        idx = rng.choice(S, size=cfg.branching, replace=False)
        e = rng.standard_exponential(cfg.branching)
        row[idx] = e / e.sum()
    if cfg.smoothing:
        row = (1 - cfg.smoothing) * row + cfg.smoothing / S
    return row


def _normalize(raw: np.ndarray) -> tuple[np.ndarray, dict]:
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        return np.full_like(raw, 0.5), {"reward_offset": lo, "reward_scale": 0.0}
    return (raw - lo) / (hi - lo), {"reward_offset": lo, "reward_scale": hi - lo}


def generate(cfg: GarnetConfig) -> MdpModel:
    """Random MDP with uniformly drawn kernel rows and rewards mapped onto [0, 1].

    Gaussian rewards ``N(0, sigma_sa)`` with ``sigma_sa ~ U[0, 1]`` are
    affinely rescaled over the whole matrix (min to 0, max to 1); the offset
    and scale are kept in ``model.meta``.
    """
    S, A = cfg.n_states, cfg.n_actions
    kernel = np.stack([_row(cfg, k) for k in range(S * A)]).reshape(S, A, S)
    rng = stream(cfg.seed, S * A)
    if cfg.reward_law is RewardLaw.GAUSSIAN_NORMALIZED:
        sigma = rng.uniform(0.0, 1.0, size=(S, A))
        raw = rng.normal(0.0, 1.0, size=(S, A)) * sigma
    else:
        raw = rng.uniform(0.0, 1.0, size=(S, A))
    rewards, affine = _normalize(raw)
    meta = {
        "generator": "garnet",
        "seed": cfg.seed,
        "smoothing": cfg.smoothing,
        "reward_law": cfg.reward_law.value,
        "branching": cfg.branching,
        **affine,
    }
    model = MdpModel(kernel, rewards, meta)
    problems = validate_model(model)
    if problems:  # pragma: no cover - generator bug guard
        raise AssertionError(problems)
    return model


def fingerprint(model: MdpModel) -> str:
    """SHA-256 of the canonical JSON of sizes, kernel and rewards (metadata excluded)."""
    bare = MdpModel(model.kernel, model.rewards)
    return hashlib.sha256(dumps_model(bare).encode("utf-8")).hexdigest()
