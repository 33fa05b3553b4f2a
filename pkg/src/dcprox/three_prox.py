"""Three-prox splitting for objectives g - h - f with three convex parts.

The iteration runs three independent proximal evaluations per step,

    u = prox_h((delta*s - gamma*t)/(delta - gamma), gamma*delta/(delta-gamma))
    v = prox_g(s, gamma)
    z = prox_f(t, delta)

followed by the pair of relaxed updates s+ = s + lam*(v - u) and
t+ = t + mu*(u - z), both computed from the pre-update state. The update is
a diagonally scaled gradient step on the smooth surrogate

    Psi(s, t) = g_env(s) - f_env(t) - h_env((delta*s - gamma*t)/(delta-gamma))
                + ||s - t||^2 / (2*(delta - gamma)),

namely (s+, t+) = (s, t) - diag(gamma*lam, delta*mu) grad Psi(s, t).

The module also carries the lifted two-function reformulation on the
doubled space (used as a test oracle only): G(x, y) = g(x) + conj(f)(y)
and H(x, y) = h(x) + <x, y>, iterated by the diagonal-metric two-prox
solver with stepsize diag(gamma, 1/delta), relaxation diag(lam, mu) and
unit quadratic shift.
"""

import time
from dataclasses import dataclass

import numpy as np

from .envelope import DcInstance, dc_value
from .prox import (
    CapabilityError,
    NumericalError,
    ProxFunction,
    _as_vector,
    prox_conjugate_scaled,
    validate_diagonal,
)
from .reports import CallCounter, RunReport, Termination, TracePoint
from .two_prox import DESCENT_SLACK, run_diag


@dataclass(frozen=True)
class ThreeTermInstance:
    """Problem data for phi = g - h - f with f, g, h proper convex lsc."""

    f: ProxFunction
    g: ProxFunction
    h: ProxFunction
    dim: int

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("dim must be nonnegative")
        for part in (self.f, self.g, self.h):
            if part.dim is not None and part.dim != self.dim:
                raise ValueError(
                    f"{type(part).__name__} has dim {part.dim}, instance dim {self.dim}")

    def phi(self, x):
        g_val = self.g.value(x)
        if g_val == np.inf:
            return np.inf
        rest = self.h.value(x) + self.f.value(x)
        return dc_value(g_val, rest)


@dataclass(frozen=True)
class ThreeProxConfig:
    """Stepsizes and relaxations for the three-prox iteration.

    Admissible box (boundaries rejected): 0 < gamma < 1 < delta,
    0 < lam < 2*(1 - gamma), 0 < mu < 2*(1 - 1/delta).
    """

    gamma: float = 0.5
    delta: float = 2.0
    lam: float = 0.45
    mu: float = 0.45
    tol: float = 1e-6
    max_iter: int = 1000
    record_trace: bool = True
    record_iterates: bool = False

    def validate(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.delta > 1.0:
            raise ValueError(f"delta must exceed 1, got {self.delta}")
        if not 0.0 < self.lam < 2.0 * (1.0 - self.gamma):
            raise ValueError(
                f"lam must lie in (0, {2.0 * (1.0 - self.gamma)}), got {self.lam}")
        hi = 2.0 * (1.0 - 1.0 / self.delta)
        if not 0.0 < self.mu < hi:
            raise ValueError(f"mu must lie in (0, {hi}), got {self.mu}")
        if self.tol < 0 or self.max_iter < 1:
            raise ValueError("tol must be nonnegative and max_iter positive")

    @property
    def h_step(self):
        return self.gamma * self.delta / (self.delta - self.gamma)


def default_config(gamma=0.5, delta=2.0, safety=0.9, **kw):
    """Config with relaxations at ``safety`` times half the admissible range."""
    return ThreeProxConfig(gamma=gamma, delta=delta,
                           lam=safety * (1.0 - gamma),
                           mu=safety * (1.0 - 1.0 / delta), **kw)


def _h_point(cfg, s, t):
    return (cfg.delta * s - cfg.gamma * t) / (cfg.delta - cfg.gamma)


def three_prox_step(inst, cfg, s, t):
    """One iteration; returns (s_plus, t_plus, u, v, z)."""
    cfg.validate()
    s = _as_vector(s)
    t = _as_vector(t)
    u = inst.h.prox(_h_point(cfg, s, t), cfg.h_step)
    v = inst.g.prox(s, cfg.gamma)
    z = inst.f.prox(t, cfg.delta)
    return s + cfg.lam * (v - u), t + cfg.mu * (u - z), u, v, z


def psi_value(inst, cfg, s, t):
    """The four-term surrogate value at (s, t)."""
    cfg.validate()
    s = _as_vector(s)
    t = _as_vector(t)
    w = _h_point(cfg, s, t)
    u = inst.h.prox(w, cfg.h_step)
    v = inst.g.prox(s, cfg.gamma)
    z = inst.f.prox(t, cfg.delta)
    return _psi_from_points(inst, cfg, s, t, u, v, z)


def _psi_from_points(inst, cfg, s, t, u, v, z):
    w = _h_point(cfg, s, t)
    dv, dz, du, dst = v - s, z - t, u - w, s - t
    g_env = inst.g.value_at_prox(v, s, cfg.gamma) + 0.5 * float(dv @ dv) / cfg.gamma
    f_env = inst.f.value_at_prox(z, t, cfg.delta) + 0.5 * float(dz @ dz) / cfg.delta
    h_env = inst.h.value_at_prox(u, w, cfg.h_step) + 0.5 * float(du @ du) / cfg.h_step
    quad = 0.5 * float(dst @ dst) / (cfg.delta - cfg.gamma)
    return g_env - f_env - h_env + quad


def psi_gradient_identity_check(inst, cfg, s, t, fd_step=None):
    """Deviation between the update and the scaled finite-difference gradient.

    Computes grad Psi by central differences and returns
    ||(s+, t+) - ((s, t) - diag(gamma*lam, delta*mu) grad_fd)||.
    """
    cfg.validate()
    s = _as_vector(s)
    t = _as_vector(t)
    n = s.shape[0]
    x = np.concatenate([s, t])
    if fd_step is None:
        fd_step = 1e-5 * (1.0 + float(np.linalg.norm(x)))

    def psi(xv):
        return psi_value(inst, cfg, xv[:n], xv[n:])

    grad_fd = np.empty(2 * n)
    for i in range(2 * n):
        e = np.zeros(2 * n)
        e[i] = fd_step
        grad_fd[i] = (psi(x + e) - psi(x - e)) / (2.0 * fd_step)
    s_plus, t_plus, _, _, _ = three_prox_step(inst, cfg, s, t)
    predicted = x - np.concatenate([cfg.gamma * cfg.lam * grad_fd[:n],
                                    cfg.delta * cfg.mu * grad_fd[n:]])
    return float(np.linalg.norm(np.concatenate([s_plus, t_plus]) - predicted))


def run3(inst, cfg, s0, t0):
    """Iterate until ||(u - v, u - z)|| <= tol or the iteration budget ends.

    The surrogate trace must be nonincreasing with the weighted guaranteed
    decrease; a violation beyond rounding slack ends the run with a
    numerical-error status.
    """
    cfg.validate()
    s = _as_vector(np.array(s0, dtype=float))
    t = _as_vector(np.array(t0, dtype=float))
    if s.shape[0] != inst.dim or t.shape[0] != inst.dim:
        raise ValueError("start points must match the instance dimension")
    counter = CallCounter()
    trace = []
    iterates = [] if cfg.record_iterates else None
    t_start = time.perf_counter_ns()

    if inst.dim == 0:
        return RunReport(solver="three-prox", termination=Termination.CONVERGED,
                         iterations=0, final_s=s, final_u=s, final_v=s,
                         final_t=t, final_z=t, gamma=cfg.gamma,
                         params={"delta": cfg.delta, "lam": cfg.lam, "mu": cfg.mu})

    # weighted decrease: s-block lam*(2*(1-gamma)-lam)/(gamma*(1-gamma)) on
    # ||u-v||^2, t-block mu*(2*(1-1/delta)-mu)/(delta-1) on ||u-z||^2, halved
    w_s = cfg.lam * (2.0 * (1.0 - cfg.gamma) - cfg.lam) / (cfg.gamma * (1.0 - cfg.gamma))
    w_t = cfg.mu * (2.0 * (1.0 - 1.0 / cfg.delta) - cfg.mu) / (cfg.delta - 1.0)

    status = Termination.MAX_ITER
    message = ""
    prev_psi = None
    prev_decr = 0.0
    u = v = z = s
    k = 0
    while k < cfg.max_iter:
        if iterates is not None:
            iterates.append((s.copy(), t.copy()))
        try:
            u = inst.h.prox(_h_point(cfg, s, t), cfg.h_step)
            v = inst.g.prox(s, cfg.gamma)
            z = inst.f.prox(t, cfg.delta)
        except (NumericalError, np.linalg.LinAlgError) as exc:
            status = Termination.NUMERICAL_ERROR
            message = f"prox evaluation failed: {exc}"
            break
        counter.prox_h += 1
        counter.prox_g += 2  # one call each on g and f; f tallied with g
        duv = u - v
        duz = u - z
        residual = float(np.sqrt(duv @ duv + duz @ duz))
        psi = _psi_from_points(inst, cfg, s, t, u, v, z)
        decr = 0.5 * (w_s * float(duv @ duv) + w_t * float(duz @ duz))
        if cfg.record_trace or not trace:
            trace.append(TracePoint(k=k, env=psi, residual=residual,
                                    phi=inst.phi(u), decrement=decr,
                                    prox_h=counter.prox_h, prox_g=counter.prox_g,
                                    grad_h=counter.grad_h,
                                    wall_ns=time.perf_counter_ns() - t_start))
        else:
            trace[-1] = TracePoint(k=k, env=psi, residual=residual,
                                   phi=inst.phi(u), decrement=decr,
                                   prox_h=counter.prox_h, prox_g=counter.prox_g,
                                   grad_h=counter.grad_h,
                                   wall_ns=time.perf_counter_ns() - t_start)
        k += 1
        if prev_psi is not None and psi > prev_psi - prev_decr + DESCENT_SLACK * (1.0 + abs(prev_psi)):
            status = Termination.NUMERICAL_ERROR
            message = (f"surrogate descent violated at iteration {k}: "
                       f"{prev_psi:.12g} -> {psi:.12g}")
            break
        if residual <= cfg.tol:
            status = Termination.CONVERGED
            break
        if k >= cfg.max_iter:
            break
        prev_psi, prev_decr = psi, decr
        s = s + cfg.lam * (v - u)
        t = t + cfg.mu * (u - z)

    if trace and status is not Termination.NUMERICAL_ERROR:
        last = trace[-1]
        trace[-1] = TracePoint(k=last.k, env=last.env, residual=last.residual,
                               phi=last.phi, decrement=0.0, prox_h=last.prox_h,
                               prox_g=last.prox_g, grad_h=last.grad_h,
                               wall_ns=last.wall_ns)
    return RunReport(solver="three-prox", termination=status, iterations=k,
                     final_s=s, final_u=u, final_v=v, final_t=t, final_z=z,
                     trace=trace, iterates=iterates, gamma=cfg.gamma,
                     params={"delta": cfg.delta, "lam": cfg.lam, "mu": cfg.mu},
                     message=message)


def stationarity_certificate(inst, cfg, report, sample_points, slack):
    """Largest violation of the three subgradient inequalities at the limit.

    At convergence, xi_h = (w - u) / h_step, xi_g = (s - u)/gamma and
    xi_f = (t - u)/delta should be subgradients of h, g, f at u; each is
    screened against its defining inequality at the given sample points.
    Infinite function values at a sample are skipped (the inequality is
    vacuous there).
    """
    s, t, u = report.final_s, report.final_t, report.final_u
    w = _h_point(cfg, s, t)
    candidates = [(inst.h, (w - u) / cfg.h_step),
                  (inst.g, (s - u) / cfg.gamma),
                  (inst.f, (t - u) / cfg.delta)]
    worst = 0.0
    for fn, xi in candidates:
        base = fn.value(u)
        if base == np.inf:
            return np.inf
        for zpt in sample_points:
            val = fn.value(zpt)
            if val == np.inf:
                continue
            gap = base + float(xi @ (zpt - u)) - val
            worst = max(worst, gap - slack * (1.0 + float(np.linalg.norm(zpt - u))))
    return worst


# ---------------------------------------------------------------------------
# lifted two-function oracle (test-only reformulation on the doubled space)


class ConjugatePart(ProxFunction):
    """Fenchel conjugate of an atom, proxed through the Moreau identity.

    The value is available only for atoms with a closed-form conjugate
    (quadratics, the l1 norm, zero); that is all the lifted oracle needs.
    """

    def __init__(self, f):
        self.f = f
        self.dim = f.dim

    def value(self, y):
        return self.f.conjugate_value(y)

    def prox(self, y, sigma_step):
        return prox_conjugate_scaled(self.f, sigma_step, y)


class LiftedCoupling(ProxFunction):
    """H(x, y) = h(x) + <x, y> on the doubled space.

    Nonconvex but convex after adding ||(x, y)||^2/2; its diagonal-metric
    prox has a closed form whenever the metric is uniform on each block
    with product of the two block stepsizes below one.
    """

    def __init__(self, h, n):
        self.h = h
        self.n = int(n)
        self.dim = 2 * self.n

    def _split(self, x):
        x = _as_vector(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"expected dimension {self.dim}")
        return x[:self.n], x[self.n:]

    def value(self, x):
        xs, ys = self._split(x)
        h_val = self.h.value(xs)
        return np.inf if h_val == np.inf else h_val + float(xs @ ys)

    def prox(self, x, gamma):
        return self.prox_diag(x, np.full(self.dim, float(gamma)))

    @property
    def supports_diag(self):
        return True

    def prox_diag(self, x, entries):
        entries = validate_diagonal(entries, self.dim)
        a_blk, b_blk = entries[:self.n], entries[self.n:]
        if not (np.all(a_blk == a_blk[0]) and np.all(b_blk == b_blk[0])):
            raise CapabilityError("coupling prox needs blockwise-uniform stepsizes")
        a, b = float(a_blk[0]), float(b_blk[0])
        if a * b >= 1.0:
            raise ValueError(f"coupling prox needs a*b < 1, got {a * b}")
        s_blk, t_blk = self._split(x)
        xs = self.h.prox((s_blk - a * t_blk) / (1.0 - a * b), a / (1.0 - a * b))
        ys = t_blk - b * xs
        return np.concatenate([xs, ys])


def lifted_pair(inst):
    """The (G, H) two-function reformulation of a three-term instance."""
    from .prox import BlockSeparable
    g_lift = BlockSeparable([(inst.g, inst.dim), (ConjugatePart(inst.f), inst.dim)])
    h_lift = LiftedCoupling(inst.h, inst.dim)
    return DcInstance(g=g_lift, h=h_lift, dim=2 * inst.dim, mu=1.0,
                      name="lifted")


def run3_via_lifted(inst, cfg, s0, t0, record_iterates=False):
    """Run the diagonal two-prox solver on the lifted pair.

    Starts at (s0, t0/delta) with stepsize diag(gamma, 1/delta), relaxation
    diag(lam, mu) and unit shift; the s-block of its iterates reproduces the
    direct three-prox recursion.
    """
    cfg.validate()
    n = inst.dim
    lifted = lifted_pair(inst)
    gamma_diag = np.concatenate([np.full(n, cfg.gamma), np.full(n, 1.0 / cfg.delta)])
    lam_diag = np.concatenate([np.full(n, cfg.lam), np.full(n, cfg.mu)])
    start = np.concatenate([_as_vector(s0), _as_vector(t0) / cfg.delta])
    return run_diag(lifted, gamma_diag, lam_diag, start, m_diag=np.ones(2 * n),
                    tol=cfg.tol, max_iter=cfg.max_iter,
                    record_iterates=record_iterates)
