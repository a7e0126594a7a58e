"""Lower-bound formulas and auxiliary estimates, all in natural-log units.

Nothing here simulates the coding scheme; these are the analytic curves the
experiments are compared against, plus two small Monte-Carlo checks
(:func:`renewal_log_bound` and the exit-time tail via :mod:`path_sim`).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import InvalidModelError, ZeroTailMassError
from .levy_model import LOG2E, LevyTriplet, f1, f2, tail_mass

LN2 = math.log(2.0)


@dataclass(frozen=True)
class WeightedAtoms:
    """Finite measure with atoms of weight ``w_i`` carrying payoff ``h_i``."""

    weights: tuple
    payoffs: tuple

    def __init__(self, atoms):
        pairs = [(float(w), float(h)) for w, h in atoms]
        if not pairs:
            raise InvalidModelError("need at least one atom")
        for w, h in pairs:
            if not (w > 0 and math.isfinite(w)):
                raise InvalidModelError(f"weights must be positive and finite, got {w}")
            if not (h >= 0 and math.isfinite(h)):
                raise InvalidModelError(f"payoffs must be non-negative and finite, got {h}")
        object.__setattr__(self, "weights", tuple(w for w, _ in pairs))
        object.__setattr__(self, "payoffs", tuple(h for _, h in pairs))


@dataclass(frozen=True)
class WaterfillResult:
    lam: float
    xi: tuple
    value: float


def _solve_log_level(w, log_h, r):
    """Root of the piecewise-linear ``L -> sum w_i (log h_i - L)_+ - r``."""
    order = np.argsort(-log_h)
    lw, ll = w[order], log_h[order]
    cw, cs = np.cumsum(lw), np.cumsum(lw * ll)
    for k in range(ll.size):
        # the top k + 1 atoms are active on [ll[k+1], ll[k]]
        level = (cs[k] - r) / cw[k]
        if k + 1 == ll.size or level >= ll[k + 1]:
            return float(level)
    raise AssertionError("unreachable")


def waterfill(problem: WeightedAtoms, r: float) -> WaterfillResult:
    """Minimise ``sum w_i h_i e^-xi_i`` subject to ``sum w_i xi_i <= r``, ``xi >= 0``.

    The solution is ``xi_i = ln+(h_i / lam)`` with the level ``lam`` fixed by
    the budget; the minimum equals ``sum w_i min(lam, h_i)``.  The budget
    equation is piecewise linear in ``ln lam`` and is solved exactly there,
    so levels far below the float range still give correct ``xi``.
    """
    if not r >= 0:
        raise ValueError(f"rate must be non-negative, got {r}")
    w = np.array(problem.weights)
    h = np.array(problem.payoffs)
    positive = h > 0
    if not positive.any():
        raise InvalidModelError("water-filling needs at least one positive payoff")
    log_h = np.full(h.shape, -np.inf)
    log_h[positive] = np.log(h[positive])
    if r == 0:
        log_lam = float(log_h.max())
    else:
        log_lam = _solve_log_level(w[positive], log_h[positive], r)
    lam = math.exp(log_lam)
    xi = np.maximum(log_h - log_lam, 0.0)
    value = float(np.sum(w * np.minimum(lam, h)))
    return WaterfillResult(lam, tuple(xi.tolist()), value)


def bernoulli_rate(d: float) -> float:
    """Rate (nats) at which a fair bit is reproduced with Hamming distortion ``d``."""
    if not 0.0 <= d <= 0.5:
        raise ValueError(f"d must lie in [0, 1/2], got {d}")
    return float(special.xlogy(d, 2.0 * d) + special.xlogy(1.0 - d, 2.0 * (1.0 - d)))


def bernoulli_distortion(r: float) -> float:
    """Inverse of :func:`bernoulli_rate` on ``[0, ln 2]``."""
    if not 0.0 <= r <= LN2:
        raise ValueError(f"r must lie in [0, ln 2], got {r}")
    if r == 0.0:
        return 0.5
    if r == LN2:
        return 0.0
    return optimize.brentq(lambda d: bernoulli_rate(d) - r, 0.0, 0.5, xtol=1e-16,
                           rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class LowerBoundPoint:
    eps: float
    rate: float  # nats
    distortion_lb: float
    kind: str  # "F2Bound" or "F1Bound"
    degenerate: bool = False

    @property
    def rate_bits(self):
        return self.rate * LOG2E


def kappa(tail: float) -> float:
    """``floor(tail) / tail``, the integrality correction of the F2 bound."""
    if not tail > 0:
        raise ZeroTailMassError("kappa needs a positive tail mass")
    return math.floor(tail) / tail


def lower_bound_f2(triplet: LevyTriplet, eps: float, c: float = 1.0) -> LowerBoundPoint:
    """Point ``(kappa F2 / e, c kappa eps)`` of the large-jump lower bound."""
    if not c > 0:
        raise ValueError("c must be positive")
    value = f2(triplet, eps)
    if not math.isfinite(value):
        raise ValueError(f"F2({eps}) is infinite")
    k = kappa(tail_mass(triplet, eps))
    return LowerBoundPoint(eps, k * value / math.e, c * k * eps, "F2Bound", k == 0.0)


@dataclass(frozen=True)
class F1Chain:
    """Intermediate quantities of the small-jump lower bound."""

    n: int
    q: float
    rate: float
    distortion_lb: float


def f1_chain(f1_2eps: float, eps: float, r0: float, c_user: float = 1.0, p: float = 1.0) -> F1Chain:
    """The small-jump bound as a function of ``F1(2 eps)``."""
    if not f1_2eps >= 18:
        raise ValueError(f"the bound needs F1(2 eps) >= 18, got {f1_2eps}")
    if not 0 < r0 < LN2:
        raise ValueError("r0 must lie in (0, ln 2)")
    if not (c_user > 0 and p >= 1):
        raise ValueError("need c_user > 0 and p >= 1")
    n = math.floor(f1_2eps / 18.0)
    q = max(0.0, (1.0 - 9.0 * n / f1_2eps) / 8.0)
    rate = c_user * n * r0 / 8.0
    dist = eps / (4.0 * n ** (1.0 / p)) * n * 2.0 * q * bernoulli_distortion(r0 / (16.0 * q))
    return F1Chain(n, q, rate, dist)


def lower_bound_f1(triplet: LevyTriplet, eps: float, r0: float, c_user: float = 1.0,
                   p: float = 1.0) -> LowerBoundPoint:
    """Point of the small-jump lower bound at rate ``c_user n r0 / 8``."""
    chain = f1_chain(f1(triplet, 2.0 * eps), eps, r0, c_user, p)
    return LowerBoundPoint(eps, chain.rate, chain.distortion_lb, "F1Bound", False)


def exit_tail_bound(triplet: LevyTriplet, eps: float, t: float) -> float:
    """``min(1, 9 / (4 F1(2 eps) t))`` bounding ``P(inf{s: |X_s| >= eps} >= t)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if math.isinf(t):
        return 0.0
    denom = 4.0 * f1(triplet, 2.0 * eps) * t
    if denom == 0:
        return 1.0
    return min(1.0, 9.0 / denom)


def renewal_log_samples(lam: float, trials: int, rng: np.random.Generator,
                        chunk: int = 10_000) -> np.ndarray:
    """Per-trial ``sum_{i<=N} (1 + ln(1/U_i))`` with ``N = min{n: U_1+...+U_n >= lam}``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    width = int(2 * lam + 10 * math.sqrt(lam) + 20)
    out = np.empty(trials)
    done = 0
    while done < trials:
        rows = min(chunk, trials - done)
        u = 1.0 - rng.random((rows, width))  # in (0, 1]
        csum = np.cumsum(u, axis=1)
        reached = csum[:, -1] >= lam
        stop = np.argmax(csum >= lam, axis=1)
        cost = np.cumsum(1.0 - np.log(u), axis=1)
        vals = cost[np.arange(rows), stop]
        ok = np.flatnonzero(reached)
        take = ok[: trials - done]
        out[done:done + take.size] = vals[take]
        done += take.size
    return out


def renewal_log_bound(lam: float, trials: int, rng: np.random.Generator):
    """``(6 ceil(2 lam), Monte-Carlo mean of the renewal log-sum)``."""
    samples = renewal_log_samples(lam, trials, rng)
    return 6.0 * math.ceil(2.0 * lam), float(samples.mean())


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

LOWER_BOUND_COLUMNS = ("eps", "rate_nats", "rate_bits", "distortion_lb", "kind", "degenerate_flag")


def lower_bounds_to_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOWER_BOUND_COLUMNS)
    for pt in points:
        w.writerow(["%.17g" % pt.eps, "%.17g" % pt.rate, "%.17g" % pt.rate_bits,
                    "%.17g" % pt.distortion_lb, pt.kind, int(pt.degenerate)])
    return buf.getvalue()


def lower_bounds_from_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [LowerBoundPoint(float(r["eps"]), float(r["rate_nats"]), float(r["distortion_lb"]),
                            r["kind"], bool(int(r["degenerate_flag"]))) for r in rows]
