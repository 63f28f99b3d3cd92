from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class SolveReport:
    """What a solver did: iterations, residual trace, outcome and diagnostics."""

    method: str
    iterations: int = 0
    converged: bool = False
    final_residual: float = float("nan")
    trace: list[float] = field(default_factory=list)
    elapsed_s: float = 0.0
    warnings: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self, include_trace: bool = True) -> dict:
        d = asdict(self)
        if not include_trace:
            d.pop("trace")
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x
