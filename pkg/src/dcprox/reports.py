"""Run reports shared by all solvers: per-iteration trace plus final state."""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class TracePoint:
    """State after computing the k-th prox tuple (before stepping).

    ``decrement`` is the theoretical lower bound on the envelope decrease
    of the step taken from this point (0 on the final, unstepped point).
    Call counters are cumulative.
    """

    k: int
    env: float
    residual: float
    phi: float
    decrement: float
    prox_h: int
    prox_g: int
    grad_h: int
    wall_ns: int


@dataclass
class RunReport:
    """Outcome of one solver run."""

    solver: str
    termination: Termination
    iterations: int
    final_s: np.ndarray
    final_u: np.ndarray
    final_v: np.ndarray
    final_t: Optional[np.ndarray] = None
    final_z: Optional[np.ndarray] = None
    trace: list = field(default_factory=list)
    iterates: Optional[list] = None
    gamma: float = 0.0
    params: dict = field(default_factory=dict)
    message: str = ""

    @property
    def converged(self):
        return self.termination is Termination.CONVERGED

    @property
    def final_residual(self):
        return self.trace[-1].residual if self.trace else 0.0

    def counts(self):
        """Final cumulative (prox_h, prox_g, grad_h) call counts."""
        if not self.trace:
            return (0, 0, 0)
        last = self.trace[-1]
        return (last.prox_h, last.prox_g, last.grad_h)


class CallCounter:
    """Cumulative prox/gradient call counts for one run."""

    def __init__(self):
        self.prox_h = 0
        self.prox_g = 0
        self.grad_h = 0


def residual_rate_check(report, rel_slack=1e-10):
    """Verify the telescoped-descent consequences on a completed run.

    Checks that the summed per-step decrements stay within the observed
    envelope gap (for scalar runs this is the bound
    sum ||u-v||^2 <= 2*gamma*(env0 - min env)/(lam*(2-lam))), and that
    k * min residual^2 over the first k steps never exceeds the running sum
    of squared residuals. Returns True when both hold.
    """
    if not report.trace:
        return True
    envs = [tp.env for tp in report.trace]
    gap = envs[0] - min(envs)
    total_decr = sum(tp.decrement for tp in report.trace)
    budget = gap + rel_slack * (1.0 + abs(gap) + abs(envs[0]))
    if total_decr > budget:
        return False
    running = 0.0
    min_sq = np.inf
    for k, tp in enumerate(report.trace[:-1], start=1):
        r2 = tp.residual ** 2
        running += r2
        min_sq = min(min_sq, r2)
        if k * min_sq > running * (1.0 + 1e-12) + 1e-300:
            return False
    return True
