"""Simulation of Levy paths on [0, 1] as piecewise-linear cadlag skeletons.

Jumps larger than a cutoff ``delta`` are drawn exactly.  Everything below
the cutoff, together with the Gaussian component, is replaced by a
Gaussian random walk on the dyadic grid ``k * h``, and the linear drift
absorbs the compensator of the truncated jumps.  Compound Poisson measures
have finite activity, so their jumps are always drawn exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from . import _kernels
from .errors import InvalidModelError, ResolutionError
from .levy_model import (
    CompoundPoisson,
    Exponential,
    GammaStandard,
    GaussianOnly,
    LevyTriplet,
    NormalLaw,
    Stable,
    drift_compensation,
    integrate_measure,
    small_jump_second_moment,
    tail_mass,
)

MAX_EXPECTED_JUMPS = 1e8


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox stream for ``(seed, *keys)``; distinct keys give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """``t -> drift_rate * t + sum(increments[times <= t])`` on [0, 1].

    ``grid_step`` records the resolution of the diffusive skeleton; it does
    not enter the path values.
    """

    times: np.ndarray
    increments: np.ndarray
    drift_rate: float = 0.0
    grid_step: float = 1.0

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64).reshape(-1)
        x = np.array(self.increments, dtype=np.float64).reshape(-1)
        if t.shape != x.shape:
            raise InvalidModelError("times and increments must have the same length")
        if t.size and (t[0] < 0.0 or t[-1] >= 1.0):
            raise InvalidModelError("event times must lie in [0, 1)")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidModelError("event times must be strictly increasing")
        if not (np.all(np.isfinite(x)) and math.isfinite(self.drift_rate)):
            raise InvalidModelError("path values must be finite")
        if not self.grid_step > 0:
            raise InvalidModelError("grid_step must be positive")
        t.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "increments", x)
        object.__setattr__(self, "drift_rate", float(self.drift_rate))
        object.__setattr__(self, "grid_step", float(self.grid_step))

    @property
    def events(self):
        return list(zip(self.times.tolist(), self.increments.tolist()))

    def __len__(self):
        return self.times.size

    def same_as(self, other: "CadlagPath") -> bool:
        """Bit-for-bit equality of events and metadata."""
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.increments, other.increments)
                and self.drift_rate == other.drift_rate
                and self.grid_step == other.grid_step)

    def without_drift(self, rate: float) -> "CadlagPath":
        """The path ``X_t - rate * t``."""
        return CadlagPath(self.times, self.increments, self.drift_rate - rate, self.grid_step)


@dataclass(frozen=True)
class SimConfig:
    grid_step: float = 2.0**-14
    small_jump_cutoff_ratio: float = 0.01
    seed: int = 0

    def __post_init__(self):
        h = self.grid_step
        if not (0 < h <= 1 and math.frexp(h)[0] == 0.5):
            raise InvalidModelError(f"grid_step must be a dyadic number in (0, 1], got {h}")
        if not 0 < self.small_jump_cutoff_ratio <= 1:
            raise InvalidModelError("small_jump_cutoff_ratio must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise InvalidModelError("seed must be an unsigned 64-bit integer")


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

def jump_cutoff(triplet: LevyTriplet, cfg: SimConfig, eps_min: float) -> float:
    """Cutoff below which jumps are replaced by Gaussian noise (0: all exact)."""
    if not eps_min > 0:
        raise ValueError(f"eps_min must be positive, got {eps_min}")
    if isinstance(triplet.measure, (CompoundPoisson, GaussianOnly)):
        return 0.0
    return cfg.small_jump_cutoff_ratio * eps_min


def diffusive_variance(triplet: LevyTriplet, delta: float) -> float:
    """Variance per unit time of the Gaussian part of the skeleton."""
    if delta == 0.0:
        return triplet.sigma2
    return triplet.sigma2 + small_jump_second_moment(triplet, delta)


def skeleton_drift(triplet: LevyTriplet, delta: float) -> float:
    """Linear drift making the skeleton match the triplet's compensation."""
    if delta > 0.0:
        return drift_compensation(triplet, delta)
    return triplet.b - integrate_measure(triplet.measure, lambda x: x, 0.0, 1.0)


def simulation_tolerance(triplet: LevyTriplet, cfg: SimConfig, eps_min: float) -> float:
    """``sqrt(h * v)`` with ``v`` the variance rate of the Gaussian substitute."""
    delta = jump_cutoff(triplet, cfg, eps_min)
    return math.sqrt(cfg.grid_step * diffusive_variance(triplet, delta))


def _gamma_jumps(delta, n, rng):
    """``n`` draws from ``x^-1 e^-x`` restricted to ``x > delta``, by rejection."""
    split = max(delta, 1.0)
    low_mass = float(exp1(delta) - exp1(split))
    high_mass = float(exp1(split))
    n_low = rng.binomial(n, low_mass / (low_mass + high_mass)) if low_mass > 0 else 0
    out = []
    # (delta, 1]: log-uniform proposal, accept with e^-(x - delta)
    need = n_low
    while need > 0:
        x = delta * np.exp(rng.random(2 * need + 8) * math.log(split / delta))
        x = x[rng.random(x.size) < np.exp(delta - x)][:need]
        out.append(x)
        need -= x.size
    # (split, inf): shifted exponential proposal, accept with split / x
    need = n - n_low
    while need > 0:
        x = split + rng.standard_exponential(2 * need + 8)
        x = x[rng.random(x.size) < split / x][:need]
        out.append(x)
        need -= x.size
    # jump times are drawn independently, so the order of sizes is irrelevant
    return np.concatenate(out) if out else np.empty(0)


def sample_jumps(triplet: LevyTriplet, delta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. jump sizes from ``nu`` restricted to ``{|x| > delta}``, normalised."""
    m = triplet.measure
    if n == 0:
        return np.empty(0)
    if isinstance(m, Stable):
        u = 1.0 - rng.random(n)
        size = delta * u ** (-1.0 / m.alpha)
        positive = rng.random(n) < m.c_plus / m.total
        return np.where(positive, size, -size)
    if isinstance(m, GammaStandard):
        return _gamma_jumps(delta, n, rng)
    if isinstance(m, CompoundPoisson):
        if delta != 0.0:
            raise ValueError("compound Poisson jumps are always sampled without cutoff")
        law = m.jump_law
        if m.is_atomic:
            values, weights = law.atoms()
            return values[rng.choice(values.size, size=n, p=weights / weights.sum())]
        if isinstance(law, Exponential):
            return law.sign * law.mean * rng.standard_exponential(n)
        if isinstance(law, NormalLaw):
            return rng.normal(law.mean, law.sd, n)
    raise InvalidModelError(f"cannot sample jumps of {type(m).__name__}")


def simulate(triplet: LevyTriplet, cfg: SimConfig, eps_min: float,
             rng: np.random.Generator | None = None) -> CadlagPath:
    """Draw one skeleton path of the ``triplet`` process on [0, 1].

    The stream defaults to ``make_rng(cfg.seed)``; replicas pass their own.
    """
    if rng is None:
        rng = make_rng(cfg.seed)
    delta = jump_cutoff(triplet, cfg, eps_min)
    m = triplet.measure
    if isinstance(m, GaussianOnly):
        lam = 0.0
    elif isinstance(m, CompoundPoisson):
        lam = m.intensity
    else:
        lam = tail_mass(triplet, delta)
    if lam > MAX_EXPECTED_JUMPS:
        raise ResolutionError(f"{lam:.3g} expected jumps above the cutoff {delta:g}")
    n_jumps = int(rng.poisson(lam)) if lam > 0 else 0
    jump_times = rng.random(n_jumps)
    jump_sizes = sample_jumps(triplet, delta, n_jumps, rng)

    var = diffusive_variance(triplet, delta)
    h = cfg.grid_step
    if var > 0.0:
        grid = np.arange(1, round(1.0 / h), dtype=np.float64) * h
        noise = rng.normal(0.0, math.sqrt(var * h), grid.size)
    else:
        grid = noise = np.empty(0)

    times = np.concatenate([jump_times, grid])
    incs = np.concatenate([jump_sizes, noise])
    order = np.argsort(times, kind="stable")
    times, incs = times[order], incs[order]
    if times.size and np.any(np.diff(times) == 0.0):
        times, start = np.unique(times, return_index=True)
        incs = np.add.reduceat(incs, start)
    return CadlagPath(times, incs, skeleton_drift(triplet, delta), h)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def value_at(path: CadlagPath, t):
    """Right-continuous path value at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(path.increments)])
    idx = np.searchsorted(path.times, t_arr, side="right")
    out = path.drift_rate * t_arr + cum[idx]
    return float(out) if out.ndim == 0 else out


def _abs_power_integral(c, d, length, p):
    """``int_0^L |c + d s|^p ds`` cellwise, exact up to rounding."""
    out = np.abs(c) ** p * length
    slope = np.abs(d) * length
    # cells where the drift moves the difference appreciably: antiderivative
    steep = slope > 1e-6 * np.abs(c)
    if np.any(steep):
        def anti(u):
            return np.sign(u) * np.abs(u) ** (p + 1.0) / (p + 1.0)
        cs, ls = c[steep], length[steep]
        out[steep] = (anti(cs + d * ls) - anti(cs)) / d
    # nearly flat cells: midpoint rule, second-order accurate in d L / c
    flat = ~steep & (slope > 0)
    if np.any(flat):
        out[flat] = np.abs(c[flat] + 0.5 * d * length[flat]) ** p * length[flat]
    return out


def lp_distance(a: CadlagPath, b: CadlagPath, p: float) -> float:
    """Exact ``L^p[0, 1]`` distance between two piecewise-linear paths."""
    if not p >= 1:
        raise ValueError(f"p must be at least 1, got {p}")
    bp = np.unique(np.concatenate([[0.0], a.times, b.times]))
    lengths = np.diff(np.append(bp, 1.0))
    ca = np.concatenate([[0.0], np.cumsum(a.increments)])
    cb = np.concatenate([[0.0], np.cumsum(b.increments)])
    jumps = (ca[np.searchsorted(a.times, bp, side="right")]
             - cb[np.searchsorted(b.times, bp, side="right")])
    d = a.drift_rate - b.drift_rate
    c = jumps + d * bp
    total = float(np.sum(_abs_power_integral(c, d, lengths, p)))
    return total ** (1.0 / p)


def first_exit_time(path: CadlagPath, level: float) -> float:
    """``inf{t in [0, 1) : |X_t| >= level}``; ``inf`` if the level is never reached."""
    return float(_kernels.first_passage(path.times, path.increments, path.drift_rate, float(level)))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def path_to_csv(path: CadlagPath) -> str:
    buf = io.StringIO()
    buf.write(f"# drift_rate={path.drift_rate!r} grid_step={path.grid_step!r}\n")
    buf.write("time,increment\n")
    for t, x in zip(path.times.tolist(), path.increments.tolist()):
        buf.write(f"{t!r},{x!r}\n")
    return buf.getvalue()


def path_from_csv(text: str) -> CadlagPath:
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise ValueError("missing '# drift_rate=... grid_step=...' header line")
    meta = dict(item.split("=", 1) for item in lines[0][1:].split())
    if lines[1].strip() != "time,increment":
        raise ValueError("expected column header 'time,increment'")
    rows = [r for r in csv.reader(lines[2:]) if r]
    times = [float(r[0]) for r in rows]
    incs = [float(r[1]) for r in rows]
    return CadlagPath(np.array(times), np.array(incs),
                      float(meta["drift_rate"]), float(meta["grid_step"]))


def save_path(path: CadlagPath, filename) -> None:
    with open(filename, "w", encoding="ascii") as fh:
        fh.write(path_to_csv(path))


def load_path(filename) -> CadlagPath:
    with open(filename, encoding="ascii") as fh:
        return path_from_csv(fh.read())
