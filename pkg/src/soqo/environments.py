"""Seeded generators of minimizer traces.

Every draw comes from a Philox stream keyed by ``(seed, replication, segment)``
through :class:`numpy.random.SeedSequence`, so a trace is a pure function of
its spec and replication index no matter which worker produces it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, NotPositiveDefinite
from .spectral import SpectralMatrix, as_spectral

LIGHT_FAMILIES = ("uniform", "normal", "laplace", "logistic", "gumbel")
HEAVY_FAMILIES = ("lognormal_sym", "lomax_sym")
FAMILIES = LIGHT_FAMILIES + HEAVY_FAMILIES
MODES = ("martingale", "shift", "mixed", "adversarial")
N_SEGMENTS = 5

_ADV_TAG = 0x61647672  # keys the adversarial-round stream apart from increments


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class IncrementSpec:
    """Zero-mean i.i.d. per-coordinate increments with variance ``variance``."""

    family: str = "normal"
    variance: float = 1.0
    lomax_alpha: float = 3.0
    lognormal_sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (self.variance >= 0 and math.isfinite(self.variance)):
            raise InvalidParameter(f"variance must be finite and >= 0, got {self.variance}")
        if self.family == "lomax_sym" and not self.lomax_alpha > 2:
            raise InvalidParameter(f"Lomax alpha must exceed 2 for finite variance, got {self.lomax_alpha}")
        if self.family == "lognormal_sym" and not self.lognormal_sigma > 0:
            raise InvalidParameter("lognormal_sigma must be > 0")

    @classmethod
    def from_dict(cls, d) -> "IncrementSpec":
        if isinstance(d, str):
            return cls(family=d)
        return cls(**d)


def _standard_draws(spec: IncrementSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance draws from ``spec.family``."""
    fam = spec.family
    if fam == "normal":
        return rng.standard_normal(shape)
    if fam == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), shape)
    if fam == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), shape)
    if fam == "logistic":
        return rng.logistic(0.0, math.sqrt(3.0) / math.pi, shape)
    if fam == "gumbel":
        beta = math.sqrt(6.0) / math.pi
        return rng.gumbel(0.0, beta, shape) - np.euler_gamma * beta
    sign = rng.choice(np.array([-1.0, 1.0]), size=shape)
    if fam == "lognormal_sym":
        s = spec.lognormal_sigma
        # second moment of exp(s Z) is exp(2 s^2)
        return sign * rng.lognormal(0.0, s, shape) / math.exp(s * s)
    a = spec.lomax_alpha
    # Lomax(a, scale 1): E[X^2] = 2 / ((a - 1)(a - 2)); the random sign removes the mean
    return sign * rng.pareto(a, shape) / math.sqrt(2.0 / ((a - 1.0) * (a - 2.0)))


def sample_increments(spec: IncrementSpec, count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. increment vectors of length ``dim``; shape ``(count, dim)``."""
    if count < 1:
        raise InvalidParameter(f"count must be >= 1, got {count}")
    z = _standard_draws(spec, (count, dim), rng)
    return math.sqrt(spec.variance) * z


def correlate(increments, sigma_block) -> np.ndarray:
    """Impose covariance ``sigma_block`` on unit-variance increments via Cholesky.

    ``increments`` is ``(k, d)``; it is flattened round-major to length ``k*d``,
    multiplied by the Cholesky factor and split back.
    """
    z = np.asarray(increments, dtype=float)
    k, d = z.shape
    S = np.asarray(sigma_block, dtype=float)
    if S.shape != (k * d, k * d):
        raise InvalidParameter(f"covariance block must be {(k * d, k * d)}, got {S.shape}")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("covariance block is not positive definite") from None
    return (L @ z.reshape(-1)).reshape(k, d)


@dataclass(frozen=True)
class AdversaryRule:
    """Fixed (non-reactive) replacement minimizers for adversarial rounds.

    ``alternating_ray`` plays ``x0 + R q, x0 - R q, ...`` in order of the
    adversarial rounds; ``fixed_points`` cycles through ``points``.
    """

    kind: str
    amplitude: float = 0.0
    direction: tuple[float, ...] | None = None
    points: tuple[tuple[float, ...], ...] | None = None

    def values(self, n_rounds: int, x0) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float)
        if self.kind == "alternating_ray":
            signs = np.where(np.arange(n_rounds) % 2 == 0, 1.0, -1.0)
            return x0 + self.amplitude * signs[:, None] * np.asarray(self.direction)
        pts = np.asarray(self.points, dtype=float)
        return pts[np.arange(n_rounds) % len(pts)]

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def adversary_rule(kind: str, params: dict | None = None, A=None) -> AdversaryRule:
    """Build an adversary.

    For ``alternating_ray`` the ``direction`` parameter is ``"min"`` (default,
    A's smallest-eigenvalue eigenvector), ``"max"``, ``"balanced"`` (the
    normalized sum of all eigenvectors) or an explicit vector.
    """
    params = dict(params or {})
    if kind == "alternating_ray":
        R = float(params.get("amplitude", params.get("R", 1.0)))
        if not (R >= 0 and math.isfinite(R)):
            raise InvalidParameter(f"amplitude must be finite and >= 0, got {R}")
        direction = params.get("direction", "min")
        if isinstance(direction, str):
            if A is None:
                raise InvalidParameter("alternating_ray with a named direction needs A")
            A = as_spectral(A)
            P = A.eigvecs
            if direction == "min":
                q = P[:, int(np.argmin(A.eigvals))]
            elif direction == "max":
                q = P[:, int(np.argmax(A.eigvals))]
            elif direction == "balanced":
                q = P.sum(axis=1) / math.sqrt(A.dim)
            else:
                raise InvalidParameter(f"unknown direction {direction!r}")
        else:
            q = np.asarray(direction, dtype=float)
            norm = np.linalg.norm(q)
            if q.ndim != 1 or norm == 0:
                raise InvalidParameter("direction must be a non-zero vector")
            q = q / norm
        return AdversaryRule(kind, amplitude=R, direction=tuple(float(c) for c in q))
    if kind == "fixed_points":
        pts = params.get("points")
        if not pts:
            raise InvalidParameter("fixed_points needs a non-empty 'points' list")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise InvalidParameter("fixed points must be finite")
        return AdversaryRule(kind, points=tuple(tuple(float(c) for c in p) for p in pts))
    raise InvalidParameter(f"unknown adversary kind {kind!r}")


@dataclass(frozen=True, eq=False)
class TraceSpec:
    dim: int
    horizon: int
    mode: str = "martingale"
    increments: IncrementSpec = field(default_factory=IncrementSpec)
    segments: tuple[IncrementSpec, ...] | None = None
    correlation: np.ndarray | None = None
    adversarial_pct: float = 0.0
    adversary: AdversaryRule | None = None
    x0: tuple[float, ...] | None = None
    seed: int = 0
    adversary_seed: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameter(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.dim < 1 or self.horizon < 1:
            raise InvalidParameter("dim and horizon must be positive")
        if self.mode == "shift":
            if self.horizon % N_SEGMENTS:
                raise InvalidParameter(f"shift mode needs horizon divisible by {N_SEGMENTS}, got {self.horizon}")
            if self.segments is None or len(self.segments) != N_SEGMENTS:
                raise InvalidParameter(f"shift mode needs exactly {N_SEGMENTS} segment specs")
        if self.mode in ("mixed", "adversarial") and self.adversary is None:
            raise InvalidParameter(f"{self.mode} mode needs an adversary rule")
        if not 0.0 <= self.adversarial_pct <= 100.0:
            raise InvalidParameter(f"adversarial_pct must lie in [0, 100], got {self.adversarial_pct}")
        if self.x0 is not None and len(self.x0) != self.dim:
            raise InvalidParameter(f"x0 has length {len(self.x0)}, expected {self.dim}")

    @property
    def start(self) -> np.ndarray:
        return np.zeros(self.dim) if self.x0 is None else np.asarray(self.x0, dtype=float)

    def adversarial_rounds(self) -> np.ndarray:
        """Sorted 0-based adversarial rounds; independent of the replication."""
        T = self.horizon
        if self.mode == "adversarial":
            return np.arange(T)
        if self.mode != "mixed":
            return np.arange(0)
        k = int(round(self.adversarial_pct / 100.0 * T))
        seed = self.seed if self.adversary_seed is None else self.adversary_seed
        rng = rng_for(seed, _ADV_TAG)
        return np.sort(rng.choice(T, size=k, replace=False))

    def with_(self, **changes) -> "TraceSpec":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return TraceSpec(**fields)

    def to_dict(self) -> dict:
        d = {
            "dim": self.dim,
            "horizon": self.horizon,
            "mode": self.mode,
            "increments": asdict(self.increments),
            "seed": self.seed,
        }
        if self.segments is not None:
            d["segments"] = [asdict(s) for s in self.segments]
        if self.correlation is not None:
            d["correlation"] = np.asarray(self.correlation).tolist()
        if self.mode == "mixed":
            d["adversarial_pct"] = self.adversarial_pct
        if self.adversary is not None:
            d["adversary"] = self.adversary.to_dict()
        if self.x0 is not None:
            d["x0"] = list(self.x0)
        if self.adversary_seed is not None:
            d["adversary_seed"] = self.adversary_seed
        return d

    @classmethod
    def from_dict(cls, d: dict, A=None) -> "TraceSpec":
        d = dict(d)
        kw = {"dim": int(d.pop("dim")), "horizon": int(d.pop("horizon"))}
        for key in ("mode", "seed", "adversarial_pct", "adversary_seed"):
            if key in d:
                kw[key] = d.pop(key)
        if "increments" in d:
            kw["increments"] = IncrementSpec.from_dict(d.pop("increments"))
        if "segments" in d:
            kw["segments"] = tuple(IncrementSpec.from_dict(s) for s in d.pop("segments"))
        if "correlation" in d:
            kw["correlation"] = np.asarray(d.pop("correlation"), dtype=float)
        if "x0" in d:
            kw["x0"] = tuple(float(c) for c in d.pop("x0"))
        if "adversary" in d:
            adv = dict(d.pop("adversary"))
            kind = adv.pop("kind")
            kw["adversary"] = adversary_rule(kind, adv, A)
        if d:
            raise InvalidParameter(f"unknown trace fields: {sorted(d)}")
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class MinimizerTrace:
    v: np.ndarray
    x0: np.ndarray
    spec: TraceSpec | None = None
    replication: int | None = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        if v.ndim != 2 or x0.shape != (v.shape[1],):
            raise InvalidParameter(f"inconsistent trace shapes v={v.shape}, x0={x0.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("trace has non-finite entries")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "x0", x0)

    @property
    def horizon(self) -> int:
        return self.v.shape[0]

    @property
    def dim(self) -> int:
        return self.v.shape[1]

    def increments(self) -> np.ndarray:
        return np.diff(np.vstack([self.x0, self.v]), axis=0)


def _increments(spec: TraceSpec, replication: int) -> np.ndarray:
    T, d = spec.horizon, spec.dim
    if spec.mode == "shift":
        seg_len = T // N_SEGMENTS
        parts = []
        for k, seg in enumerate(spec.segments):
            rng = rng_for(spec.seed, replication, k)
            if spec.correlation is None:
                parts.append(sample_increments(seg, seg_len, d, rng))
            else:
                z = sample_increments(IncrementSpec(seg.family, 1.0, seg.lomax_alpha, seg.lognormal_sigma), seg_len, d, rng)
                parts.append(correlate(z, spec.correlation))
        return np.vstack(parts)
    rng = rng_for(spec.seed, replication, 0)
    inc = spec.increments
    if spec.correlation is None:
        return sample_increments(inc, T, d, rng)
    z = sample_increments(IncrementSpec(inc.family, 1.0, inc.lomax_alpha, inc.lognormal_sigma), T, d, rng)
    return correlate(z, spec.correlation)


def generate_trace(spec: TraceSpec, replication: int = 0) -> MinimizerTrace:
    x0 = spec.start
    if spec.mode == "adversarial":
        v = spec.adversary.values(spec.horizon, x0)
    else:
        v = x0 + np.cumsum(_increments(spec, replication), axis=0)
        tau = spec.adversarial_rounds()
        if tau.size:
            v[tau] = spec.adversary.values(tau.size, x0)
    return MinimizerTrace(v, x0, spec, replication)


def generate_batch(spec: TraceSpec, replications) -> np.ndarray:
    """Stack of ``v`` arrays, shape ``(len(replications), T, d)``."""
    return np.stack([generate_trace(spec, int(r)).v for r in replications])


def write_trace_csv(trace: MinimizerTrace, path, extra: dict | None = None) -> Path:
    """Write ``t,coord,value`` rows plus a ``.json`` sidecar with provenance."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "coord", "value"])
        for t, row in enumerate(trace.v, start=1):
            for i, value in enumerate(row):
                w.writerow([t, i, repr(float(value))])
    meta = {"x0": trace.x0.tolist(), "replication": trace.replication}
    if trace.spec is not None:
        meta["spec"] = trace.spec.to_dict()
    if extra:
        meta.update(extra)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_trace_csv(path) -> tuple[MinimizerTrace, dict]:
    """Inverse of :func:`write_trace_csv`; the sidecar is optional."""
    path = Path(path)
    entries = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t", "coord", "value"} <= set(reader.fieldnames):
            raise InvalidParameter(f"{path}: expected columns t,coord,value")
        for row in reader:
            entries[(int(row["t"]), int(row["coord"]))] = float(row["value"])
    if not entries:
        raise InvalidParameter(f"{path}: empty trace")
    T = max(t for t, _ in entries)
    d = max(i for _, i in entries) + 1
    v = np.full((T, d), np.nan)
    for (t, i), value in entries.items():
        v[t - 1, i] = value
    if np.isnan(v).any():
        raise InvalidParameter(f"{path}: missing (t, coord) entries")
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    x0 = np.asarray(meta.get("x0", np.zeros(d)), dtype=float)
    return MinimizerTrace(v, x0, None, meta.get("replication")), meta
