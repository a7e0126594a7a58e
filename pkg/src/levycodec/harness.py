"""Experiment engine: round trips, Monte-Carlo sweeps over eps, slope fits.

Replica ``i`` of grid point ``j`` draws its path from the stream
``make_rng(seed, j, i)``, so a sweep gives identical numbers whether the
replicas run serially or in a process pool, and in any order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import levy_model as lm
from .codec import (
    CodecParams,
    Truncation,
    audit_bit_bound,
    decode,
    encode_path,
    encode_truncated,
    truncation_budget,
)
from .errors import LevyCodecError, SweepFailedError, ZeroTailMassError
from .path_sim import (
    CadlagPath,
    SimConfig,
    first_exit_time,
    lp_distance,
    make_rng,
    simulate,
    simulation_tolerance,
)
from .theory import exit_tail_bound, f1_chain, kappa

MODES = ("entropy", "quant")
MAX_FAILURE_FRACTION = 0.01
# relative slack on 3 eps absorbing floating-point rounding in the error integral
FLOAT_SLACK = 1e-9
RD_SCHEMA = "rdpoint/1"


@dataclass(frozen=True)
class ExperimentConfig:
    triplet: lm.LevyTriplet
    eps_grid: tuple
    replicas: int = 100
    p: float = 1.0
    sim: SimConfig = field(default_factory=SimConfig)
    mode: str = "entropy"
    c1: float = 8.0
    c2: float = 8.0
    time_code: str = "self_delimiting"

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eps_grid)
        object.__setattr__(self, "eps_grid", grid)
        if not grid or any(not e > 0 for e in grid):
            raise ValueError("eps_grid must be a non-empty list of positive numbers")
        if any(a <= b for a, b in zip(grid, grid[1:])):
            raise ValueError("eps_grid must be strictly descending")
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if not self.p >= 1:
            raise ValueError("p must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def with_(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self) -> dict:
        return {
            "triplet": lm.triplet_to_dict(self.triplet),
            "eps_grid": list(self.eps_grid),
            "replicas": self.replicas,
            "p": self.p,
            "sim": asdict(self.sim),
            "mode": self.mode,
            "c1": self.c1,
            "c2": self.c2,
            "time_code": self.time_code,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        sim = SimConfig(**d.get("sim", {}))
        return cls(lm.triplet_from_dict(d["triplet"]), tuple(d["eps_grid"]),
                   int(d.get("replicas", 100)), float(d.get("p", 1.0)), sim,
                   d.get("mode", "entropy"), float(d.get("c1", 8.0)), float(d.get("c2", 8.0)),
                   d.get("time_code", "self_delimiting"))

    @classmethod
    def load(cls, filename) -> "ExperimentConfig":
        with open(filename, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def codec_params(triplet: lm.LevyTriplet, eps: float, p: float = 1.0, mode: str = "entropy",
                 c1: float = 8.0, c2: float = 8.0,
                 time_code: str = "self_delimiting") -> CodecParams:
    """Canonical parameters: ``b_eps = b(eps)`` and ``m = F1(eps)`` (1 if that vanishes)."""
    f1 = lm.f1(triplet, eps)
    trunc = Truncation(c1, c2, lm.f_total(triplet, eps)) if mode == "quant" else None
    return CodecParams(eps, lm.drift_compensation(triplet, eps), f1 if f1 > 0 else 1.0, p,
                       trunc, time_code)


# --------------------------------------------------------------------------
# single round trip
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    bits: int
    error: float
    audit: float
    truncated: bool
    lossless: bool
    certificate_ok: bool
    M: int


def trial_on_path(path: CadlagPath, params: CodecParams, tol: float) -> TrialResult:
    """Encode, decode and measure one given path."""
    if params.quant_mode:
        stream, records, truncated = encode_truncated(path, params)
    else:
        (stream, records), truncated = encode_path(path, params), False
    rec = decode(stream, params)
    lossless = (rec.truncated_to_zero == truncated
                and list(rec.s_hat) == [r.s_hat for r in records]
                and list(rec.z) == [r.z for r in records])
    error = lp_distance(path, rec.to_path(), params.p)
    bits = len(stream)
    if truncated:
        audit = truncation_budget(params)
        ok = lossless and bits <= audit
    else:
        audit = audit_bit_bound(records, params)
        ok = lossless and bits <= audit and error <= 3.0 * params.eps * (1 + FLOAT_SLACK) + tol
    return TrialResult(bits, error, audit, truncated, lossless, ok, len(records))


def roundtrip_trial(triplet: lm.LevyTriplet, eps: float, cfg: ExperimentConfig,
                    mode: Optional[str] = None, rng: Optional[np.random.Generator] = None,
                    path: Optional[CadlagPath] = None) -> TrialResult:
    """Simulate (unless ``path`` is given), encode, decode and certify one replica."""
    mode = cfg.mode if mode is None else mode
    params = codec_params(triplet, eps, cfg.p, mode, cfg.c1, cfg.c2, cfg.time_code)
    tol = simulation_tolerance(triplet, cfg.sim, eps)
    if path is None:
        path = simulate(triplet, cfg.sim, eps, rng)
    return trial_on_path(path, params, tol)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RDPoint:
    eps: float
    mean_bits: float
    max_bits: float
    mean_error_lp: float
    max_error_lp: float
    rms_error_lp: float
    f1: float
    f2: float
    f_total: float
    replicas: int
    tol: float
    truncated: int = 0
    failed: int = 0
    cert_failures: int = 0
    bit_budget: float = math.nan


RD_COLUMNS = tuple(f.name for f in fields(RDPoint))
_INT_COLUMNS = {"replicas", "truncated", "failed", "cert_failures"}


def _replica_job(args):
    cfg_dict, j, i = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    eps = cfg.eps_grid[j]
    try:
        return roundtrip_trial(cfg.triplet, eps, cfg, rng=make_rng(cfg.sim.seed, j, i))
    except LevyCodecError as exc:
        return exc


def _aggregate(cfg: ExperimentConfig, eps: float, results) -> RDPoint:
    good = [r for r in results if isinstance(r, TrialResult)]
    failed = len(results) - len(good)
    bits = np.array([r.bits for r in good], dtype=np.float64)
    err = np.array([r.error for r in good], dtype=np.float64)

    def stat(fn, a):
        return float(fn(a)) if a.size else math.nan

    f1 = lm.f1(cfg.triplet, eps)
    f2 = lm.f2(cfg.triplet, eps)
    budget = math.nan
    if cfg.mode == "quant":
        budget = truncation_budget(codec_params(cfg.triplet, eps, cfg.p, "quant", cfg.c1, cfg.c2,
                                                cfg.time_code))
    return RDPoint(
        eps=eps,
        mean_bits=stat(np.mean, bits),
        max_bits=stat(np.max, bits),
        mean_error_lp=stat(np.mean, err),
        max_error_lp=stat(np.max, err),
        rms_error_lp=stat(lambda a: np.sqrt(np.mean(a * a)), err),
        f1=f1,
        f2=f2,
        f_total=f1 + f2,
        replicas=len(good),
        tol=simulation_tolerance(cfg.triplet, cfg.sim, eps),
        truncated=sum(r.truncated for r in good),
        failed=failed,
        cert_failures=sum(not r.certificate_ok for r in good),
        bit_budget=budget,
    )


def sweep(config: ExperimentConfig, workers: int = 1, out: Optional[str] = None):
    """Run ``config.replicas`` round trips per grid point and aggregate them.

    Raises :class:`SweepFailedError` if more than 1% of the replicas at any
    grid point raised errors.  Writes the table to ``out`` when given.
    """
    cfg_dict = config.to_dict()
    jobs = [(cfg_dict, j, i) for j in range(len(config.eps_grid)) for i in range(config.replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_replica_job(job) for job in jobs]
    points = []
    for j, eps in enumerate(config.eps_grid):
        block = results[j * config.replicas:(j + 1) * config.replicas]
        pt = _aggregate(config, eps, block)
        if pt.failed > MAX_FAILURE_FRACTION * config.replicas:
            errors = sorted({type(r).__name__ for r in block if not isinstance(r, TrialResult)})
            raise SweepFailedError(
                f"{pt.failed} of {config.replicas} replicas failed at eps={eps} ({', '.join(errors)})")
        points.append(pt)
    if out is not None:
        with open(out, "w", encoding="ascii", newline="") as fh:
            fh.write(rd_to_csv(points))
    return points


def _fmt(name, value):
    return str(int(value)) if name in _INT_COLUMNS else "%.17g" % value


def rd_to_csv(points) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={RD_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RD_COLUMNS)
    for pt in points:
        w.writerow([_fmt(c, getattr(pt, c)) for c in RD_COLUMNS])
    return buf.getvalue()


def rd_from_csv(text: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# schema={RD_SCHEMA}":
        raise ValueError(f"expected '# schema={RD_SCHEMA}' header")
    out = []
    for row in csv.DictReader(lines[1:]):
        out.append(RDPoint(**{c: int(row[c]) if c in _INT_COLUMNS else float(row[c])
                              for c in RD_COLUMNS}))
    return out


# --------------------------------------------------------------------------
# fits and envelopes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def slope_fit(points, transform: str = "loglog") -> SlopeFit:
    """Least-squares line through ``(ln x, ln y)`` (or ``(x, y)`` for ``"linear"``)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("slope_fit needs at least 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if transform == "loglog":
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fits need positive coordinates")
        x, y = np.log(x), np.log(y)
    elif transform != "linear":
        raise ValueError(f"unknown transform {transform!r}")
    if np.ptp(x) == 0:
        raise ValueError("degenerate abscissa: all x values coincide")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return SlopeFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class Envelope:
    lower: float
    upper: float
    c1_fit: float  # geometric mean of mean_bits / F(eps)

    @property
    def ratio(self):
        return self.upper / self.lower


def envelope(points) -> Envelope:
    """Spread of ``mean_bits / F(eps)`` in bits per nat over a set of RD points."""
    r = np.array([pt.mean_bits / pt.f_total for pt in points])
    return Envelope(float(r.min()), float(r.max()), float(np.exp(np.mean(np.log(r)))))


def rd_slopes(points) -> dict:
    """Bits-vs-1/eps and error-vs-bits log-log slopes of a sweep."""
    bits = slope_fit([(1.0 / pt.eps, pt.mean_bits) for pt in points])
    err = slope_fit([(pt.mean_bits, pt.mean_error_lp) for pt in points])
    return {"bits_vs_inv_eps": asdict(bits), "error_vs_bits": asdict(err)}


# --------------------------------------------------------------------------
# theory overlay and the exit-time experiment
# --------------------------------------------------------------------------

THEORY_COLUMNS = ("eps", "kind", "rate_nats", "rate_bits", "distortion_lb", "degenerate_flag",
                  "f1", "f2", "f_total", "tail_mass")


def theory_curves(triplet: lm.LevyTriplet, eps_grid, r0: float = 0.5, c: float = 1.0,
                  c_user: float = 1.0, p: float = 1.0):
    """Rows of both lower-bound curves plus the F functionals on ``eps_grid``.

    Points where a bound is unavailable (no jumps above eps, or
    ``F1(2 eps) < 18``) carry ``degenerate_flag = 1``.
    """
    rows = []
    for eps in eps_grid:
        f1 = lm.f1(triplet, eps)
        f2 = lm.f2(triplet, eps)
        tail = lm.tail_mass(triplet, eps)
        base = {"eps": eps, "f1": f1, "f2": f2, "f_total": f1 + f2, "tail_mass": tail}
        try:
            k = kappa(tail)
            rate, dist, degenerate = k * f2 / math.e, c * k * eps, k == 0.0
        except ZeroTailMassError:
            rate, dist, degenerate = 0.0, 0.0, True
        if not math.isfinite(f2):
            rate, dist, degenerate = math.inf, 0.0, True
        rows.append({**base, "kind": "F2Bound", "rate_nats": rate, "rate_bits": rate * lm.LOG2E,
                     "distortion_lb": dist, "degenerate_flag": int(degenerate)})
        f1_2 = lm.f1(triplet, 2.0 * eps)
        if f1_2 >= 18:
            chain = f1_chain(f1_2, eps, r0, c_user, p)
            rate, dist, degenerate = chain.rate, chain.distortion_lb, False
        else:
            rate, dist, degenerate = 0.0, 0.0, True
        rows.append({**base, "kind": "F1Bound", "rate_nats": rate, "rate_bits": rate * lm.LOG2E,
                     "distortion_lb": dist, "degenerate_flag": int(degenerate)})
    return rows


def theory_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THEORY_COLUMNS)
    for r in rows:
        w.writerow([r[c] if c in ("kind", "degenerate_flag") else "%.17g" % r[c]
                    for c in THEORY_COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True)
class ExitTailRow:
    eps: float
    t: float
    exceedance: float
    std_error: float
    bound: float


def exit_tail_experiment(triplet: lm.LevyTriplet, eps_list, t_list, sim: SimConfig,
                         replicas: int, stream: int = 0):
    """Monte-Carlo ``P(T >= t)`` for ``T = inf{s: |X_s| >= eps}`` against the bound.

    One path per replica serves every ``eps``; the simulation cutoff is
    set by the smallest ``eps``.
    """
    eps_min = min(eps_list)
    hits = np.empty((replicas, len(eps_list)))
    for i in range(replicas):
        path = simulate(triplet, sim, eps_min, make_rng(sim.seed, stream, i))
        hits[i] = [first_exit_time(path, e) for e in eps_list]
    rows = []
    for j, eps in enumerate(eps_list):
        for t in t_list:
            ind = hits[:, j] >= t
            prob = float(ind.mean())
            se = float(np.sqrt(max(prob * (1 - prob), 1.0 / replicas) / replicas))
            rows.append(ExitTailRow(eps, t, prob, se, exit_tail_bound(triplet, eps, t)))
    return rows
