"""Central-difference validation of analytic backward passes.

The checker perturbs every element of every input (including parameters),
projects the output onto a fixed random upstream gradient, and compares the
numeric derivative against the analytic one at double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_EPS = 1e-6
DEFAULT_TOL = 1e-4


@dataclass
class GradReport:
    op: str
    seed: int
    max_rel_error: float
    tol: float
    per_input: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.op:<22s} seed={self.seed:<3d} max_rel={self.max_rel_error:.3e} tol={self.tol:.0e} {status}"


def finite_diff_check(
    op: str,
    fwd: Callable[[], np.ndarray],
    grad: Callable[[np.ndarray], list[np.ndarray]],
    inputs: list[tuple[str, np.ndarray]],
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> GradReport:
    """Compare ``grad`` against central differences of ``fwd``.

    ``fwd`` recomputes the forward pass from the (mutable) input arrays;
    ``grad(upstream)`` returns one gradient array per input, aligned with
    ``inputs``. Relative error per element is |a - n| / max(|a|, |n|, 1e-8).
    """
    rng = np.random.default_rng(seed)
    out = fwd()
    upstream = rng.standard_normal(np.shape(out))
    analytic = grad(upstream)
    if len(analytic) != len(inputs):
        raise ValueError(f"{op}: expected {len(inputs)} gradients, got {len(analytic)}")

    per_input: dict[str, float] = {}
    for (name, x), a in zip(inputs, analytic):
        flat = x.reshape(-1)
        num = np.zeros(flat.size, dtype=np.float64)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            # subtracting the baseline keeps the projection's summation error
            # proportional to the eps-sized increment, not the output magnitude
            f_plus = float(np.sum((fwd() - out) * upstream))
            flat[i] = orig - eps
            f_minus = float(np.sum((fwd() - out) * upstream))
            flat[i] = orig
            num[i] = (f_plus - f_minus) / (2.0 * eps)
        a_flat = np.asarray(a, dtype=np.float64).reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a_flat), np.abs(num)), 1e-8)
        rel = np.abs(a_flat - num) / denom
        per_input[name] = float(rel.max()) if rel.size else 0.0

    max_rel = max(per_input.values()) if per_input else 0.0
    return GradReport(op=op, seed=seed, max_rel_error=max_rel, tol=tol, per_input=per_input)
