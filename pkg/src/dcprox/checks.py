"""Instance diagnostics: the runtime-checkable consequences of the theory.

Each check returns (ok, measured, budget) so callers can print or assert;
``run_instance_checks`` bundles the standard battery for one DC instance.
"""

import numpy as np

from .envelope import dce_eval, dce_fbe_equivalence_check, negate_smooth, sandwich_bounds
from .prox import _as_vector
from .two_prox import TwoProxConfig, run


def finite_difference_gradient(fun, x, step):
    """Central finite differences of a scalar function, coordinatewise."""
    x = _as_vector(x).astype(float)
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return grad


def check_gradient(inst, gamma, points, rel_tol=1e-5):
    """Envelope gradient vs central differences at the given points.

    Measures ||fd - grad|| / (1 + ||grad||) with the documented step
    1e-5*(1 + ||s||); returns (ok, worst, rel_tol).
    """
    worst = 0.0
    for s in points:
        s = _as_vector(s)
        ev = dce_eval(inst, gamma, s)
        step = 1e-5 * (1.0 + float(np.linalg.norm(s)))
        fd = finite_difference_gradient(lambda x: dce_eval(inst, gamma, x).env, s, step)
        err = float(np.linalg.norm(fd - ev.grad)) / (1.0 + float(np.linalg.norm(ev.grad)))
        worst = max(worst, err)
    return worst <= rel_tol, worst, rel_tol


def check_descent(inst, cfg, s0, iters=50):
    """Run a bounded number of iterations and re-verify the descent bound."""
    probe = TwoProxConfig(gamma=cfg.gamma, lam=cfg.lam, tol=0.0, max_iter=iters,
                          record_trace=True)
    report = run(inst, probe, s0)
    worst = -np.inf
    for a, b in zip(report.trace, report.trace[1:]):
        slack = 1e-12 * (1.0 + abs(a.env))
        worst = max(worst, b.env - (a.env - a.decrement + slack))
    ok = (report.termination.value != "numerical_error") and worst <= 0.0
    return ok, worst, 0.0


def check_sandwich(inst, gamma, points):
    """lower <= env <= upper at each point; returns the worst violation."""
    worst = 0.0
    for s in points:
        ev = dce_eval(inst, gamma, s)
        lower, upper = sandwich_bounds(inst, gamma, s)
        slack = 1e-10 * (1.0 + abs(ev.env))
        if lower != np.inf:
            worst = max(worst, lower - ev.env - slack)
        if upper != np.inf:
            worst = max(worst, ev.env - upper - slack)
    return worst <= 0.0, worst, 0.0


def check_fbe(inst, gamma, points, rel_tol=1e-8):
    """Envelope vs forward-backward surrogate for smooth-h instances."""
    if inst.smooth_h is None:
        return True, 0.0, rel_tol
    f = negate_smooth(inst.smooth_h)
    if f.lipschitz > 0 and gamma >= 1.0 / f.lipschitz:
        raise ValueError("fbe check needs gamma < 1/L_h")
    dev = dce_fbe_equivalence_check(f, inst.g, gamma, points)
    scale = 1.0 + max(abs(dce_eval(inst, gamma, _as_vector(s)).env) for s in points)
    return dev <= rel_tol * scale, dev, rel_tol * scale


def common_subgradient_gap(inst, gamma, s, u, v, sample_points, slack):
    """Violation of the approximate-stationarity certificate at (s, u, v).

    xi = (s - u)/gamma should be a subgradient of g at v (exactly it is one
    up to ||u - v||/gamma) and of h at u; screens both subgradient
    inequalities at the samples with the given slack per unit distance.
    """
    s, u, v = _as_vector(s), _as_vector(u), _as_vector(v)
    xi = (s - u) / gamma
    worst = -np.inf
    for fn, base_pt in ((inst.g, v), (inst.h, u)):
        base = fn.value(base_pt)
        if base == np.inf:
            return np.inf
        for z in sample_points:
            val = fn.value(z)
            if val == np.inf:
                continue
            gap = base + float(xi @ (z - base_pt)) - val
            worst = max(worst, gap - slack * (1.0 + float(np.linalg.norm(z - base_pt))))
    return worst


def run_instance_checks(inst, gamma, s0, rng, n_points=20):
    """The standard battery; returns a list of (name, ok, measured, budget)."""
    s0 = _as_vector(s0)
    points = [s0 + rng.standard_normal(inst.dim) for _ in range(n_points)]
    results = []
    ok, worst, budget = check_gradient(inst, gamma, points)
    results.append(("gradient-fd", ok, worst, budget))
    lam = 0.9 * (1.0 - gamma * inst.mu) if inst.mu else 1.0
    ok, worst, budget = check_descent(inst, TwoProxConfig(gamma=gamma, lam=lam), s0)
    results.append(("descent-50-iters", ok, worst, budget))
    ok, worst, budget = check_sandwich(inst, gamma, points)
    results.append(("sandwich-bounds", ok, worst, budget))
    if inst.smooth_h is not None:
        lip = inst.smooth_h.lipschitz
        fbe_gamma = gamma if lip == 0 or gamma < 1.0 / lip else 0.9 / lip
        ok, worst, budget = check_fbe(inst, fbe_gamma, points)
        results.append(("dce-fbe-equivalence", ok, worst, budget))
    return results
