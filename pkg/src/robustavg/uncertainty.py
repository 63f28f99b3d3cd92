"""(s,a)-rectangular uncertainty sets and their support functions.

The support function of a value vector ``v`` on a set ``P`` is
``min_{q in P} q.v``: the one-step value an adversary can force.  Three
families are provided, each centred at the nominal row ``p``:

* contamination  ``{(1-R) p + R p' : p' in simplex}``
* total variation ``{q : 0.5 * |q - p|_1 <= R}``
* KL divergence   ``{q : KL(q || p) <= R}`` (solved through its 1-d dual)

An optional interior smoothing ``delta`` mixes every member of the set with
the uniform distribution, which keeps all candidate kernels strictly
positive.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mdp import MdpModel


class RadiusError(ValueError):
    """Radius outside the domain of its uncertainty-set family."""


class Kind(str, enum.Enum):
    CONTAMINATION = "contamination"
    TV = "tv"
    KL = "kl"

    @property
    def code(self) -> int:
        return {"contamination": _kernels.CONTAMINATION, "tv": _kernels.TV, "kl": _kernels.KL}[
            self.value
        ]


def _check_radius(kind: Kind, R) -> None:
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)) or np.any(R < 0):
        raise RadiusError(f"{kind.value} radius must be a finite nonnegative number, got {R}")
    if kind is not Kind.KL and np.any(R > 1):
        raise RadiusError(f"{kind.value} radius must lie in [0, 1], got {R}")


def _check_distribution(p) -> np.ndarray:
    p = np.ascontiguousarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("nominal row must be a probability vector")
    return p


@dataclass(frozen=True)
class SupportResult:
    value: float
    minimizer: np.ndarray


@dataclass(frozen=True)
class UncertaintySpec:
    """Uncertainty-set descriptor shared by every (s, a) pair.

    ``radius`` is either a scalar or an ``[s, a]`` matrix.  ``smoothing`` is
    the uniform mixing weight applied to every candidate row.
    """

    kind: Kind
    radius: float | np.ndarray = 0.0
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        r = np.asarray(self.radius, dtype=float)
        if r.ndim not in (0, 2):
            raise RadiusError("radius must be a scalar or an [s][a] matrix")
        _check_radius(self.kind, r)
        if r.ndim == 0:
            object.__setattr__(self, "radius", float(r))
        else:
            r = r.copy()
            r.flags.writeable = False
            object.__setattr__(self, "radius", r)
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")

    @classmethod
    def nominal(cls) -> "UncertaintySpec":
        """The degenerate set containing only the nominal kernel."""
        return cls(Kind.CONTAMINATION, 0.0)

    @classmethod
    def from_dict(cls, d: dict) -> "UncertaintySpec":
        return cls(Kind(d["kind"]), d.get("radius", 0.0), float(d.get("smoothing", 0.0)))

    def to_dict(self) -> dict:
        r = self.radius if np.ndim(self.radius) == 0 else np.asarray(self.radius).tolist()
        d = {"kind": self.kind.value, "radius": r}
        if self.smoothing:
            d["smoothing"] = self.smoothing
        return d

    def radius_at(self, s: int, a: int) -> float:
        if np.ndim(self.radius) == 0:
            return float(self.radius)
        return float(self.radius[s, a])

    def radius_matrix(self, n_states: int, n_actions: int) -> np.ndarray:
        if np.ndim(self.radius) == 0:
            return np.full((n_states, n_actions), float(self.radius))
        if self.radius.shape != (n_states, n_actions):
            raise RadiusError(
                f"radius matrix shape {self.radius.shape} != ({n_states}, {n_actions})"
            )
        return np.asarray(self.radius)

    @property
    def is_degenerate(self) -> bool:
        return self.smoothing == 0.0 and not np.any(np.asarray(self.radius))


def _single(kind: Kind, p, v, R) -> SupportResult:
    p = _check_distribution(p)
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != p.shape:
        raise ValueError("value vector and nominal row differ in length")
    _check_radius(kind, R)
    values = np.empty(1)
    Q = np.empty((1, p.size))
    _kernels.batch_support(kind.code, p[None, :], v, np.array([float(R)]), values, Q)
    return SupportResult(float(values[0]), Q[0])


def support_contamination(p, v, R: float) -> SupportResult:
    """Closed form ``(1-R) p.v + R min(v)``; the extra mass lands on the lowest-index argmin."""
    return _single(Kind.CONTAMINATION, p, v, R)


def support_tv(p, v, R: float) -> SupportResult:
    """Exact LP solution: shift up to ``R`` mass from the largest values onto the smallest."""
    return _single(Kind.TV, p, v, R)


def support_kl(p, v, R: float) -> SupportResult:
    """KL-ball support through ``-min_{alpha>=0} R alpha + alpha log p.exp(-v/alpha)``.

    The scalar dual is minimized by golden-section search on
    ``[1e-12, max(1, 10 span(v)/R)]``.  The minimizer is the exponentially
    tilted nominal row, or the ``alpha -> 0`` limit (nominal mass restricted to
    the minimizing states) when the dual optimum sits at the lower end.
    """
    return _single(Kind.KL, p, v, R)


def support(spec: UncertaintySpec, s: int, a: int, p, v) -> SupportResult:
    r = _single(spec.kind, p, v, spec.radius_at(s, a))
    if spec.smoothing:
        d = spec.smoothing
        v = np.asarray(v, dtype=float)
        return SupportResult(
            (1 - d) * r.value + d * float(v.mean()), (1 - d) * r.minimizer + d / v.size
        )
    return r


class SupportOperator:
    """Support function of one model/spec pair, prepared for repeated sweeps.

    Binds the nominal rows and per-row radii once so that the solvers' inner
    loops pay only the compiled kernel call.
    """

    def __init__(self, model: MdpModel, spec: UncertaintySpec):
        self.model = model
        self.spec = spec
        S, A = model.n_states, model.n_actions
        self.shape = (S, A)
        self._rows = np.ascontiguousarray(model.kernel.reshape(S * A, S))
        self._radius = np.ascontiguousarray(spec.radius_matrix(S, A).reshape(-1))
        self._code = spec.kind.code
        self._delta = spec.smoothing
        self._subsets = {}

    def _subset(self, mask):
        key = np.asarray(mask, dtype=bool).tobytes()
        hit = self._subsets.get(key)
        if hit is None:
            idx = np.flatnonzero(np.asarray(mask, dtype=bool).reshape(-1))
            hit = (idx, np.ascontiguousarray(self._rows[idx]), np.ascontiguousarray(self._radius[idx]))
            if len(self._subsets) < 64:
                self._subsets[key] = hit
        return hit

    def rows(self, v, mask=None):
        """Support values (and minimizers) for the selected rows, flat order."""
        v = np.ascontiguousarray(v, dtype=float)
        if mask is None:
            idx, P, rad = None, self._rows, self._radius
        else:
            idx, P, rad = self._subset(mask)
        values = np.empty(P.shape[0])
        Q = np.empty_like(P)
        _kernels.batch_support(self._code, P, v, rad, values, Q)
        if self._delta:
            d = self._delta
            values = (1 - d) * values + d * v.mean()
            Q = (1 - d) * Q + d / v.size
        return idx, values, Q

    def __call__(self, v, mask=None) -> np.ndarray:
        """``[s, a]`` matrix of support values; unselected pairs are ``nan``."""
        idx, values, _ = self.rows(v, mask)
        if idx is None:
            return values.reshape(self.shape)
        out = np.full(self.shape[0] * self.shape[1], np.nan)
        out[idx] = values
        return out.reshape(self.shape)

    def minimizers(self, v) -> np.ndarray:
        _, _, Q = self.rows(v)
        S = self.shape[0]
        return Q.reshape(S, self.shape[1], S)


def support_batch(model: MdpModel, spec: UncertaintySpec, v, mask=None) -> np.ndarray:
    """Support values for all ``(s, a)`` pairs as an ``[s, a]`` matrix."""
    return SupportOperator(model, spec)(v, mask)


def worst_kernel(model: MdpModel, spec: UncertaintySpec, v) -> np.ndarray:
    """Kernel whose ``(s, a)`` row attains the support of ``v`` on that pair's set."""
    return SupportOperator(model, spec).minimizers(v)


def in_set(kind: Kind, p, q, R: float, tol: float = 1e-8) -> bool:
    """Membership test for the (unsmoothed) set of the given family."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(q < -tol) or abs(q.sum() - 1) > tol:
        return False
    return bool(_violation(Kind(kind), p, q[None, :], R)[0] <= tol)


def _violation(kind: Kind, p, Q, R):
    """Amount by which each row of ``Q`` breaks the set constraint (<= 0 inside)."""
    if kind is Kind.TV:
        return 0.5 * np.abs(Q - p).sum(axis=1) - R
    if kind is Kind.KL:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(Q > 0, Q * np.log(Q / p), 0.0)
        return terms.sum(axis=1) - R
    # contamination: q = (1-R)p + R p' with p' >= 0  <=>  q >= (1-R)p
    return np.max((1 - R) * p - Q, axis=1)


def kl_divergence(q, p) -> float:
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.where(q > 0, q * np.log(q / p), 0.0).sum())


def _simplex_grid(n: int, resolution: float):
    steps = int(round(1.0 / resolution))
    if n == 1:
        yield np.ones((1, 1))
        return
    if n == 2:
        x = np.arange(steps + 1) / steps
        yield np.stack([x, 1 - x], axis=1)
        return
    # chunk over the first coordinate to bound memory
    for i in range(steps + 1):
        rest = _simplex_grid_rest(n - 1, steps - i, steps)
        yield np.hstack([np.full((rest.shape[0], 1), i / steps), rest])


def _simplex_grid_rest(n: int, budget: int, steps: int) -> np.ndarray:
    if n == 1:
        return np.array([[budget / steps]])
    if n == 2:
        x = np.arange(budget + 1)
        return np.stack([x, budget - x], axis=1) / steps
    parts = []
    for i in range(budget + 1):
        sub = _simplex_grid_rest(n - 1, budget - i, steps)
        parts.append(np.hstack([np.full((sub.shape[0], 1), i / steps), sub]))
    return np.vstack(parts)


def oracle_support(kind, p, v, R: float, resolution: float) -> float:
    """Brute-force ``min q.v`` over a simplex grid intersected with the set.

    Test oracle only; refuses more than four states.  The nominal row is
    always included so the feasible set is never empty.
    """
    kind = Kind(kind)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.size > 4:
        raise ValueError("oracle_support is limited to at most 4 states")
    best = float(p @ v)
    for Q in _simplex_grid(p.size, resolution):
        ok = _violation(kind, p, Q, R) <= 1e-12
        if np.any(ok):
            best = min(best, float((Q[ok] @ v).min()))
    return best


def oracle_support_lp(kind, p, v, R: float) -> float:
    """LP oracle for the polyhedral families (contamination, TV) via HiGHS."""
    from scipy.optimize import linprog

    kind = Kind(kind)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n = p.size
    if kind is Kind.CONTAMINATION:
        res = linprog(v, A_eq=np.ones((1, n)), b_eq=[1.0], bounds=[(lo, None) for lo in (1 - R) * p])
        return float(res.fun)
    if kind is Kind.TV:
        # variables q (n) and t (n) with t >= |q - p|, sum t <= 2R
        c = np.concatenate([v, np.zeros(n)])
        eye = np.eye(n)
        A_ub = np.vstack([
            np.hstack([eye, -eye]),
            np.hstack([-eye, -eye]),
            np.concatenate([np.zeros(n), np.ones(n)])[None, :],
        ])
        b_ub = np.concatenate([p, -p, [2 * R]])
        A_eq = np.concatenate([np.ones(n), np.zeros(n)])[None, :]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (2 * n))
        return float(res.fun)
    raise ValueError("the LP oracle covers only contamination and tv sets")


def tv_dual_value(p, v, R: float, mu) -> float:
    """Dual objective ``p.(v-mu) - R sp(v-mu)`` of the TV support LP at multiplier ``mu >= 0``.

    Every ``mu >= 0`` gives a lower bound on the support; its maximum over
    ``mu`` equals the LP value.
    """
    w = np.asarray(v, dtype=float) - np.asarray(mu, dtype=float)
    return float(np.asarray(p) @ w - R * (w.max() - w.min()))


def kl_dual_value(p, v, R: float, alpha: float) -> float:
    """Lower bound ``-(R alpha + alpha log p.exp(-v/alpha))`` on the KL support."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    m = v[p > 0].min()
    acc = float(p[p > 0] @ np.exp(-(v[p > 0] - m) / alpha))
    return m - (R * alpha + alpha * np.log(acc))


def grid_points(n: int, resolution: float) -> np.ndarray:
    """Materialized simplex grid (small ``n`` only)."""
    return np.vstack(list(_simplex_grid(n, resolution)))


__all__ = [
    "Kind",
    "RadiusError",
    "SupportResult",
    "UncertaintySpec",
    "support_contamination",
    "support_tv",
    "support_kl",
    "support",
    "support_batch",
    "SupportOperator",
    "worst_kernel",
    "in_set",
    "kl_divergence",
    "oracle_support",
    "oracle_support_lp",
    "tv_dual_value",
    "kl_dual_value",
]
