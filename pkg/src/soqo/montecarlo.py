"""Monte Carlo estimators and the exact scenario-tree oracle."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .environments import TraceSpec, generate_batch
from .errors import HorizonTooLarge, InvalidParameter
from .policies import PolicySpec, solve_offline, total_costs
from .spectral import as_spectral

STATISTICS = ("total_cost", "regret_vs_lai", "ratio_vs_lai", "ratio_vs_offline")
CHUNK = 250
SCENARIO_MAX_T = 8
GOLDEN_TOL = 1e-10


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    p95: float
    n_runs: int

    @classmethod
    def from_samples(cls, samples) -> "MonteCarloEstimate":
        x = np.asarray(samples, dtype=float).reshape(-1)
        if x.size < 1:
            raise InvalidParameter("no samples")
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(np.mean(x)), se, float(np.percentile(x, 95)), int(x.size))


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    # both costs zero: the policies agree
    return np.where((den == 0) & (num == 0), 1.0, r)


def statistic_samples(policy, A, v, x0, statistic: str) -> np.ndarray:
    """Per-trace values of ``statistic`` for a batch ``v`` of shape ``(N, T, d)``."""
    if statistic not in STATISTICS:
        raise InvalidParameter(f"unknown statistic {statistic!r}; expected one of {STATISTICS}")
    cost = total_costs(policy, A, v, x0)
    if statistic == "total_cost":
        return cost
    if statistic == "ratio_vs_offline":
        return _ratio(cost, total_costs("offline-opt", A, v, x0))
    ref = cost if PolicySpec.parse(policy).name == "lai" else total_costs("lai", A, v, x0)
    if statistic == "regret_vs_lai":
        return cost - ref
    return _ratio(cost, ref)


def _chunk_samples(args):
    policies, A, spec, reps, statistic = args
    v = generate_batch(spec, reps)
    return [statistic_samples(p, A, v, spec.start, statistic) for p in policies]


def sample_many(policies, A, spec: TraceSpec, N: int, statistic: str, workers: int = 1) -> list[np.ndarray]:
    """Per-replication samples for several policies on shared traces.

    Replications ``0..N-1`` are processed in fixed-size chunks and merged by
    index, so the output does not depend on ``workers``.
    """
    A = as_spectral(A)
    policies = [str(PolicySpec.parse(p)) for p in policies]
    chunks = [(policies, A, spec, range(s, min(N, s + CHUNK)), statistic) for s in range(0, N, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_samples, chunks))
    else:
        parts = [_chunk_samples(c) for c in chunks]
    return [np.concatenate([part[k] for part in parts]) for k in range(len(policies))]


def monte_carlo(policy, trace_spec: TraceSpec, N: int, statistic: str, A, workers: int = 1) -> MonteCarloEstimate:
    """Estimate ``statistic`` for ``policy`` over replications ``0..N-1`` of ``trace_spec``.

    Comparators (LAI, the offline optimum) see the same trace as the policy.
    """
    if N < 2:
        raise InvalidParameter("monte_carlo needs N >= 2")
    (samples,) = sample_many([policy], A, trace_spec, N, statistic, workers)
    return MonteCarloEstimate.from_samples(samples)


def offline_costs(A, v, x0) -> tuple[np.ndarray, np.ndarray]:
    """Offline-optimal total cost and KKT residual per trace."""
    from .policies import cost_terms

    x, resid = solve_offline(A, x0, v)
    hit, switch = cost_terms(A, x0, v, x)
    return hit.sum(axis=-1) + switch.sum(axis=-1), resid


# --- scenario-tree oracle -------------------------------------------------


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _node_value(lam: float, sigma: float, T: int, t: int, v: float):
    """Value function at round ``t`` with minimizer ``v`` as quadratic coefficients.

    Returns ``(a, b, c)`` with ``V(x_prev) = a (x_prev - v)^2 + b (x_prev - v) + c``,
    fitted exactly from three numerically minimized evaluations (the value
    function of a linear-quadratic problem is quadratic in the state).
    """
    if t < T:
        up = _node_value(lam, sigma, T, t + 1, v + sigma)
        down = _node_value(lam, sigma, T, t + 1, v - sigma)

        def future(x):
            return 0.5 * (
                up[0] * (x - v - sigma) ** 2 + up[1] * (x - v - sigma) + up[2]
                + down[0] * (x - v + sigma) ** 2 + down[1] * (x - v + sigma) + down[2]
            )
    else:
        def future(x):
            return 0.0

    h = sigma if sigma > 0 else 1.0
    half_width = 10.0 * sigma * T
    vals = []
    for x_prev in (v - h, v, v + h):
        def objective(x, x_prev=x_prev):
            return 0.5 * lam * (x - v) ** 2 + 0.5 * (x - x_prev) ** 2 + future(x)

        vals.append(golden_section(objective, v - half_width, v + half_width)[1])
    lo, mid, hi = vals
    return (hi + lo - 2.0 * mid) / (2.0 * h * h), (hi - lo) / (2.0 * h), mid


def scenario_tree_optimum(lam: float, sigma: float, T: int, x0: float = 0.0) -> float:
    """Online-optimal expected cost for ``d = 1`` and increments ``+-sigma`` w.p. 1/2.

    Backward induction over the binary scenario tree with a golden-section
    minimization at every node; independent of any coefficient recursion.
    """
    if T > SCENARIO_MAX_T:
        raise HorizonTooLarge(f"scenario tree limited to T <= {SCENARIO_MAX_T}, got {T}")
    if T < 1:
        raise InvalidParameter("T must be >= 1")
    if sigma == 0:
        return 0.0
    total = 0.0
    for v1 in (x0 + sigma, x0 - sigma):
        a, b, c = _node_value(lam, sigma, T, 1, v1)
        total += 0.5 * (a * (x0 - v1) ** 2 + b * (x0 - v1) + c)
    return total


def binary_paths(sigma: float, T: int, x0: float = 0.0) -> np.ndarray:
    """All ``2^T`` equiprobable ``+-sigma`` minimizer paths, shape ``(2^T, T, 1)``."""
    signs = 1.0 - 2.0 * ((np.arange(2**T)[:, None] >> np.arange(T)[None, :]) & 1)
    return (x0 + sigma * np.cumsum(signs, axis=1))[:, :, None]


def scenario_expected_cost(policy, lam: float, sigma: float, T: int, x0: float = 0.0) -> float:
    """Exact expected cost of ``policy`` by enumerating every scenario path."""
    v = binary_paths(sigma, T, x0)
    return float(np.mean(total_costs(policy, [lam], v, [x0])))
