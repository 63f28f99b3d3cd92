"""Exact linear algebra for fixed (non-robust) Markov chains.

These routines evaluate a policy under one stationary kernel by direct dense
solves.  They share no code path with the iterative robust solvers and serve
as the reference they are checked against.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .mdp import GainBias, MdpModel, Policy, induced_chain

RCOND_SUSPECT = 1e-12


class NonUnichainError(ValueError):
    """The chain has more than one recurrent class (or the solve is singular)."""


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ChainAnalysis:
    transition: np.ndarray
    stationary: np.ndarray
    limit_matrix: np.ndarray
    deviation_matrix: np.ndarray


def recurrent_classes(P) -> list[np.ndarray]:
    """Closed communicating classes of the positive-entry graph of ``P``."""
    P = np.asarray(P, dtype=float)
    n, labels = connected_components(P > 0, directed=True, connection="strong")
    closed = []
    for c in range(n):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(P.shape[0]), members)
        if not np.any(P[np.ix_(members, outside)] > 0):
            closed.append(members)
    return closed


def _solve(A, b, what: str):
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NonUnichainError(f"{what}: singular system ({exc})") from exc
    rcond = 1.0 / np.linalg.cond(A, 1)
    if not np.isfinite(rcond) or rcond < RCOND_SUSPECT:
        warnings.warn(f"{what}: reciprocal condition {rcond:.2e} is suspect", IllConditionedWarning)
    return x


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    classes = recurrent_classes(P)
    if len(classes) != 1:
        raise NonUnichainError(f"chain has {len(classes)} recurrent classes")
    A = (np.eye(n) - P).T
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = _solve(A, b, "stationary distribution")
    mu = np.where(np.abs(mu) < 1e-15, 0.0, mu)
    return mu


def limit_matrix(P) -> np.ndarray:
    mu = stationary_distribution(P)
    return np.tile(mu, (len(mu), 1))


def deviation_matrix(P) -> np.ndarray:
    """``H = (I - P + P*)^{-1} (I - P*)``."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    Pstar = limit_matrix(P)
    eye = np.eye(n)
    return _solve(eye - P + Pstar, eye - Pstar, "deviation matrix")


def analyze_chain(P) -> ChainAnalysis:
    P = np.asarray(P, dtype=float)
    Pstar = limit_matrix(P)
    eye = np.eye(P.shape[0])
    H = _solve(eye - P + Pstar, eye - Pstar, "deviation matrix")
    return ChainAnalysis(P, Pstar[0].copy(), Pstar, H)


def gain_and_bias(model: MdpModel, kernel, policy: Policy) -> GainBias:
    P, r = induced_chain(model, kernel, policy)
    ca = analyze_chain(P)
    return GainBias(ca.limit_matrix @ r, ca.deviation_matrix @ r)


def discounted_value(model: MdpModel, kernel, policy: Policy, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    P, r = induced_chain(model, kernel, policy)
    return np.linalg.solve(np.eye(P.shape[0]) - gamma * P, r)
