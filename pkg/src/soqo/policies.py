"""Online decision rules and offline baselines.

All interpolation policies share the update ``x_t = C_t x_{t-1} + (I - C_t) v_t``
and differ only in their coefficient schedule. Simulation runs in the
eigenbasis of ``A`` where that update is coordinate-wise, and accepts batches:
``v`` may be ``(T, d)`` or ``(N, T, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatch,
    HorizonMismatch,
    InvalidParameter,
    NotScalarMatrix,
    SolveFailure,
)
from .schedules import (
    CoefficientSchedule,
    fi_schedule,
    lai_gamma_schedule,
    lai_schedule,
    robd_matrix,
)
from .bounds import static_optimal_expected_cost  # noqa: F401  (re-exported: the baseline's closed form)
from .spectral import SpectralMatrix, as_spectral

POLICY_NAMES = ("lai", "lai-gamma", "robd", "fi", "ftm", "static-opt", "offline-opt", "general-opt")
INTERPOLATING = ("lai", "lai-gamma", "robd", "fi")
KKT_TOL = 1e-10


@dataclass(frozen=True)
class PolicySpec:
    """A named policy with parameters, e.g. ``lai-gamma:0.5`` or ``fi:0.4,0.6``."""

    name: str
    gamma: float | None = None
    eigvals: tuple[float, ...] | None = None

    @classmethod
    def parse(cls, text) -> "PolicySpec":
        if isinstance(text, PolicySpec):
            return text
        name, _, arg = str(text).strip().partition(":")
        name = name.strip().lower()
        if name not in POLICY_NAMES:
            raise InvalidParameter(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
        if name == "lai-gamma":
            try:
                gamma = float(arg)
            except ValueError:
                raise InvalidParameter(f"lai-gamma needs a numeric gamma, got {arg!r}") from None
            if not 0.0 <= gamma <= 1.0:
                raise InvalidParameter(f"gamma must lie in [0, 1], got {gamma}")
            return cls(name, gamma=gamma)
        if name == "fi":
            try:
                vals = tuple(float(s) for s in arg.split(",") if s.strip())
            except ValueError:
                raise InvalidParameter(f"fi needs a comma-separated eigenvalue list, got {arg!r}") from None
            if not vals:
                raise InvalidParameter("fi needs at least one eigenvalue")
            return cls(name, eigvals=vals)
        if arg:
            raise InvalidParameter(f"policy {name!r} takes no parameters")
        return cls(name)

    def __str__(self) -> str:
        if self.name == "lai-gamma":
            return f"lai-gamma:{self.gamma:g}"
        if self.name == "fi":
            return "fi:" + ",".join(f"{v:g}" for v in self.eigvals)
        return self.name

    def schedule(self, A: SpectralMatrix, T: int) -> CoefficientSchedule:
        return _cached_schedule(self, A, T)


@lru_cache(maxsize=256)
def _cached_schedule(spec: PolicySpec, A: SpectralMatrix, T: int) -> CoefficientSchedule:
    if spec.name in ("lai", "general-opt"):
        return lai_schedule(A, T)
    if spec.name == "lai-gamma":
        return lai_gamma_schedule(A, T, spec.gamma)
    if spec.name == "robd":
        return robd_matrix(A, T)
    if spec.name == "fi":
        vals = spec.eigvals if len(spec.eigvals) != 1 else spec.eigvals * A.dim
        if len(vals) != A.dim:
            raise DimensionMismatch(f"fi has {len(vals)} eigenvalues, A has dim {A.dim}")
        return fi_schedule(A, vals, T)
    raise InvalidParameter(f"policy {spec.name!r} has no coefficient schedule")


@dataclass(frozen=True, eq=False)
class PolicyRun:
    actions: np.ndarray
    hit_costs: np.ndarray
    switch_costs: np.ndarray
    x0: np.ndarray
    policy: str = ""

    @property
    def total(self) -> float:
        return float(np.sum(self.hit_costs) + np.sum(self.switch_costs))

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


@dataclass
class PolicyState:
    """Mutable per-run state: previous action, 1-based round about to be played."""

    x_prev: np.ndarray
    round: int = 1
    schedule: CoefficientSchedule | None = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.x_prev = np.asarray(self.x_prev, dtype=float).copy()
        if self.schedule is not None and self.round > self.schedule.horizon:
            raise HorizonMismatch(f"round {self.round} beyond horizon {self.schedule.horizon}")


class DriftOracle:
    """Forecasts ``E[v_s - v_{s-1} | F_t]`` for ``s = t+1..T``.

    Subclasses implement :meth:`forecast`, returning a ``(T - t, d)`` array.
    """

    def __init__(self, horizon: int, dim: int):
        self.horizon = horizon
        self.dim = dim

    def forecast(self, t: int, history) -> np.ndarray:
        raise NotImplementedError


class ZeroDrift(DriftOracle):
    """The martingale oracle: every expected future increment is zero."""

    def forecast(self, t, history):
        return np.zeros((self.horizon - t, self.dim))


class KnownPathDrift(DriftOracle):
    """Perfect foresight of a deterministic trace."""

    def __init__(self, v):
        v = np.asarray(v, dtype=float)
        super().__init__(v.shape[0], v.shape[1])
        self._inc = np.diff(v, axis=0)  # row k is v_{k+2} - v_{k+1}

    def forecast(self, t, history):
        return self._inc[t - 1:].copy()


class ConstantDrift(DriftOracle):
    """Deterministic expected increment ``delta`` in every future round."""

    def __init__(self, horizon, delta):
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        super().__init__(horizon, delta.size)
        self.delta = delta

    def forecast(self, t, history):
        return np.tile(self.delta, (self.horizon - t, 1))


def _check_vector(x, dim, what="vector"):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise DimensionMismatch(f"{what} has shape {x.shape}, expected trailing dim {dim}")
    return x


def step_interpolation(state: PolicyState, v_t) -> np.ndarray:
    """Play ``C_t x_{t-1} + (I - C_t) v_t`` and advance ``state``."""
    sched = state.schedule
    if sched is None:
        raise InvalidParameter("interpolation step needs a schedule")
    if state.round > sched.horizon:
        raise HorizonMismatch(f"round {state.round} beyond horizon {sched.horizon}")
    A = sched.A
    v_t = _check_vector(v_t, A.dim, "v_t")
    c = sched.at(state.round)
    gap = A.to_eigen(state.x_prev - v_t)
    x_t = v_t + A.from_eigen(c * gap)
    state.history.append(v_t.copy())
    state.x_prev = x_t
    state.round += 1
    return x_t


def step_general_optimal(state: PolicyState, v_t, drift: DriftOracle) -> np.ndarray:
    """Optimal action for an arbitrary minimizer process given drift forecasts.

    Adds to the LAI step the look-ahead term
    ``sum_{s>t} (prod_{q=t}^{s-1} C_q)(I - C_s) E[v_s - v_{s-1} | F_t]``.
    """
    sched = state.schedule
    if sched is None:
        raise InvalidParameter("general-optimal step needs the LAI schedule")
    T, t, A = sched.horizon, state.round, sched.A
    if t > T:
        raise HorizonMismatch(f"round {t} beyond horizon {T}")
    v_t = _check_vector(v_t, A.dim, "v_t")
    hist = state.history + [v_t]
    inc = np.asarray(drift.forecast(t, hist), dtype=float).reshape(-1, A.dim) if T > t else np.zeros((0, A.dim))
    if inc.shape[0] != T - t:
        raise HorizonMismatch(f"drift oracle returned {inc.shape[0]} increments, expected {T - t}")
    rho = sched.rho
    c_t = rho[t - 1]
    x_eig = c_t * A.to_eigen(state.x_prev) + (1.0 - c_t) * A.to_eigen(v_t)
    prod = c_t.copy()
    for k, delta in enumerate(A.to_eigen(inc)):
        c_s = rho[t + k]  # round s = t + 1 + k
        x_eig += prod * (1.0 - c_s) * delta
        prod *= c_s
    x_t = A.from_eigen(x_eig)
    state.history.append(v_t.copy())
    state.x_prev = x_t
    state.round += 1
    return x_t


def interpolate(schedule: CoefficientSchedule, v, x0) -> np.ndarray:
    """Batched interpolation actions for ``v`` of shape ``(..., T, d)``."""
    A = schedule.A
    v = _check_vector(v, A.dim, "trace")
    T = v.shape[-2]
    if T != schedule.horizon:
        raise HorizonMismatch(f"trace length {T} != schedule horizon {schedule.horizon}")
    y = A.to_eigen(v)
    z = np.broadcast_to(A.to_eigen(x0), y[..., 0, :].shape).copy()
    out = np.empty_like(y)
    for t in range(T):
        c = schedule.rho[t]
        z = y[..., t, :] + c * (z - y[..., t, :])
        out[..., t, :] = z
    return A.from_eigen(out)


def cost_terms(A, x0, v, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-round hitting and switching costs, each of shape ``(..., T)``."""
    A = as_spectral(A)
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    hit = 0.5 * A.quad_form(x - v)
    prev = np.concatenate([np.broadcast_to(x0, x[..., :1, :].shape), x[..., :-1, :]], axis=-2)
    step = x - prev
    switch = 0.5 * np.sum(step * step, axis=-1)
    return hit, switch


def static_optimal_action(A, x0, v) -> np.ndarray:
    """Best fixed action in hindsight for ``A = lam I``: ``(x0 + lam sum v) / (1 + lam T)``."""
    A = as_spectral(A)
    if not A.is_scalar():
        raise NotScalarMatrix("static optimum is defined here only for A = lam * I")
    lam = A.eigvals[0]
    v = _check_vector(v, A.dim, "trace")
    T = v.shape[-2]
    return (np.asarray(x0, dtype=float) + lam * v.sum(axis=-2)) / (1.0 + lam * T)


def _offline_residual(A, x0, v, x) -> np.ndarray:
    M = A.reconstruct()
    prev = np.concatenate([np.broadcast_to(x0, x[..., :1, :].shape), x[..., :-1, :]], axis=-2)
    nxt = np.concatenate([x[..., 1:, :], x[..., -1:, :]], axis=-2)  # last row: x_{T+1} := x_T
    res = (x - v) @ M + (x - prev) - (nxt - x)
    return np.max(np.abs(res), axis=(-2, -1))


def solve_offline(A, x0, v) -> tuple[np.ndarray, np.ndarray]:
    """Hindsight-optimal actions via block-tridiagonal elimination.

    Solves ``(A + 2I) x_t - x_{t-1} - x_{t+1} = A v_t`` for ``t < T`` and
    ``(A + I) x_T - x_{T-1} = A v_T``. Returns ``(actions, kkt_residual)``;
    batched over leading axes of ``v``.
    """
    A = as_spectral(A)
    v = _check_vector(v, A.dim, "trace")
    x0 = np.asarray(x0, dtype=float)
    T, d = v.shape[-2], A.dim
    M = A.reconstruct()
    I = np.eye(d)
    rhs = v @ M  # A symmetric
    inv = np.empty((T, d, d))
    r = np.empty_like(rhs)
    prev_inv = None
    for t in range(T):
        D = M + (I if t == T - 1 else 2.0 * I)
        r_t = rhs[..., t, :]
        if t == 0:
            r_t = r_t + x0
        else:
            D = D - prev_inv
            r_t = r_t + r[..., t - 1, :] @ prev_inv.T
        prev_inv = np.linalg.inv(D)
        inv[t] = prev_inv
        r[..., t, :] = r_t
    x = np.empty_like(rhs)
    x[..., T - 1, :] = r[..., T - 1, :] @ inv[T - 1].T
    for t in range(T - 2, -1, -1):
        x[..., t, :] = (r[..., t, :] + x[..., t + 1, :]) @ inv[t].T
    resid = _offline_residual(A, x0, v, x)
    scale = 1.0 + np.max(np.abs(v), axis=(-2, -1))
    if np.any(resid > KKT_TOL * scale):
        raise SolveFailure(f"KKT residual {np.max(resid):.3e} exceeds tolerance")
    return x, resid


def offline_optimal(A, x0, trace) -> PolicyRun:
    A = as_spectral(A)
    v = _trace_v(trace)
    x, _ = solve_offline(A, x0, v)
    hit, switch = cost_terms(A, x0, v, x)
    return PolicyRun(x, hit, switch, np.asarray(x0, dtype=float), "offline-opt")


def _trace_v(trace) -> np.ndarray:
    return np.asarray(getattr(trace, "v", trace), dtype=float)


def simulate(policy, A, v, x0=None) -> np.ndarray:
    """Actions of ``policy`` on (possibly batched) minimizers ``v``.

    ``general-opt`` is simulated here with the martingale (zero) oracle; use
    :func:`run_policy` with an explicit oracle otherwise.
    """
    spec = PolicySpec.parse(policy)
    A = as_spectral(A)
    v = _check_vector(v, A.dim, "trace")
    x0 = np.zeros(A.dim) if x0 is None else np.asarray(x0, dtype=float)
    T = v.shape[-2]
    if spec.name in INTERPOLATING or spec.name == "general-opt":
        return interpolate(spec.schedule(A, T), v, x0)
    if spec.name == "ftm":
        return v.copy()
    if spec.name == "static-opt":
        xs = static_optimal_action(A, x0, v)
        return np.broadcast_to(xs[..., None, :], v.shape).copy()
    if spec.name == "offline-opt":
        return solve_offline(A, x0, v)[0]
    raise InvalidParameter(f"cannot simulate {spec}")


def total_costs(policy, A, v, x0=None) -> np.ndarray:
    """Total cost per trace; shape ``v.shape[:-2]``."""
    A = as_spectral(A)
    x0 = np.zeros(A.dim) if x0 is None else np.asarray(x0, dtype=float)
    x = simulate(policy, A, v, x0)
    hit, switch = cost_terms(A, x0, v, x)
    return hit.sum(axis=-1) + switch.sum(axis=-1)


def run_policy(policy, A, trace, drift: DriftOracle | None = None, x0=None) -> PolicyRun:
    """Full per-round ledger of one policy on one trace."""
    spec = PolicySpec.parse(policy)
    A = as_spectral(A)
    v = _trace_v(trace)
    if v.ndim != 2:
        raise DimensionMismatch(f"run_policy expects a single (T, d) trace, got {v.shape}")
    if x0 is None:
        x0 = getattr(trace, "x0", None)
    x0 = np.zeros(A.dim) if x0 is None else _check_vector(x0, A.dim, "x0")
    if spec.name == "general-opt" and drift is not None:
        state = PolicyState(x0, schedule=spec.schedule(A, v.shape[0]))
        x = np.array([step_general_optimal(state, v_t, drift) for v_t in v])
    else:
        x = simulate(spec, A, v, x0)
    hit, switch = cost_terms(A, x0, v, x)
    return PolicyRun(x, hit, switch, x0, str(spec))
