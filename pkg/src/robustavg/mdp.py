"""Finite MDP containers, validation and the small helpers every solver shares."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


class ModelError(ValueError):
    """Raised when an MDP description cannot be turned into a valid model."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP with a nominal kernel indexed ``[s, a, s']`` and rewards ``[s, a]``.

    Construction does not validate; call :func:`validate_model` (the loaders
    and the Garnet generator do).
    """

    kernel: np.ndarray
    rewards: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kernel", _frozen(self.kernel))
        object.__setattr__(self, "rewards", _frozen(self.rewards))
        if self.kernel.ndim != 3 or self.rewards.ndim != 2:
            raise ModelError("kernel must be 3-d [s][a][s'] and rewards 2-d [s][a]")
        S, A, S2 = self.kernel.shape
        if S != S2 or self.rewards.shape != (S, A):
            raise ModelError(
                f"shape mismatch: kernel {self.kernel.shape}, rewards {self.rewards.shape}"
            )

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    def with_kernel(self, kernel) -> "MdpModel":
        return MdpModel(kernel, self.rewards, dict(self.meta))

    def to_dict(self) -> dict:
        d = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "kernel": self.kernel.tolist(),
            "rewards": self.rewards.tolist(),
        }
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict, *, renormalize: bool = True) -> "MdpModel":
        try:
            kernel = np.asarray(d["kernel"], dtype=float)
            rewards = np.asarray(d["rewards"], dtype=float)
            n_states, n_actions = int(d["n_states"]), int(d["n_actions"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed MDP document: {exc}") from exc
        if kernel.shape != (n_states, n_actions, n_states):
            raise ModelError(
                f"kernel shape {kernel.shape} does not match "
                f"n_states={n_states}, n_actions={n_actions}"
            )
        if renormalize:
            kernel = _renormalize_rows(kernel)
        return cls(kernel, rewards, dict(d.get("meta", {})))


def _renormalize_rows(kernel: np.ndarray) -> np.ndarray:
    sums = kernel.sum(axis=-1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > RENORMALIZE_TOL):
        s, a = np.unravel_index(np.argmax(dev), dev.shape)
        raise ModelError(
            f"kernel row ({s},{a}) sums to {sums[s, a]!r}; deviation "
            f"{dev[s, a]:.3g} exceeds renormalization tolerance {RENORMALIZE_TOL}"
        )
    # rows already stochastic are left bit-for-bit so save/load round-trips
    fix = dev > ROW_SUM_TOL
    out = kernel.copy()
    out[fix] /= sums[fix][:, None]
    return out


def dumps_model(model: MdpModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def save_model(model: MdpModel, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n", encoding="utf-8")


def load_model(path, *, renormalize: bool = True) -> MdpModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return MdpModel.from_dict(doc, renormalize=renormalize)


def validate_model(model: MdpModel) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    out = []
    K, r = model.kernel, model.rewards
    if not np.all(np.isfinite(K)):
        out.append("kernel contains non-finite entries")
    if not np.all(np.isfinite(r)):
        out.append("rewards contain non-finite entries")
    for s, a, s2 in zip(*np.nonzero(K < 0)):
        out.append(f"kernel[{s}][{a}][{s2}] = {K[s, a, s2]:.6g} is negative")
    dev = np.abs(K.sum(axis=-1) - 1.0)
    for s, a in zip(*np.nonzero(dev > ROW_SUM_TOL)):
        out.append(f"kernel row ({s},{a}) sums to {K[s, a].sum():.12g} (off by {dev[s, a]:.3g})")
    for s, a in zip(*np.nonzero((r < 0) | (r > 1))):
        out.append(f"reward ({s},{a}) = {r[s, a]:.6g} outside [0, 1]")
    return out


@dataclass(frozen=True)
class Policy:
    """Stationary policy as a row-stochastic ``[s, a]`` matrix."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        if self.probs.ndim != 2:
            raise ModelError("policy matrix must be 2-d [s][a]")
        if np.any(self.probs < 0) or np.any(np.abs(self.probs.sum(axis=1) - 1) > ROW_SUM_TOL):
            raise ModelError("policy rows must be probability distributions")

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0) | (self.probs == 1)))

    @property
    def actions(self) -> np.ndarray:
        """Most likely action per state (the action itself for deterministic policies)."""
        return np.argmax(self.probs, axis=1)

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True)
class GainBias:
    gain: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", _frozen(self.gain))
        object.__setattr__(self, "bias", _frozen(self.bias))

    @property
    def g(self) -> float:
        """Scalar gain (mean over states; exact under unichain)."""
        return float(np.mean(self.gain))


def span(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v.max() - v.min())


def greedy_policy(q_values) -> Policy:
    """Deterministic argmax policy; ties go to the lowest action index."""
    q = np.asarray(q_values, dtype=float)
    return Policy.deterministic(np.argmax(q, axis=1), q.shape[1])


def induced_chain(model: MdpModel, kernel, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and expected reward vector of the chain induced by ``policy``."""
    kernel = np.asarray(kernel, dtype=float)
    pi = policy.probs
    if kernel.shape != model.kernel.shape or pi.shape != model.rewards.shape:
        raise ModelError(
            f"cannot pair kernel {kernel.shape} / policy {pi.shape} with model "
            f"({model.n_states} states, {model.n_actions} actions)"
        )
    P = np.einsum("sa,sat->st", pi, kernel)
    r = np.einsum("sa,sa->s", pi, model.rewards)
    return P, r
