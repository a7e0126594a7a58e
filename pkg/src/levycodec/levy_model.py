"""Levy triplets and the complexity functionals of a Levy measure.

A triplet ``(nu, sigma2, b)`` uses the truncation function ``1{|x| <= 1}``:
the process has drift ``b``, Gaussian variance ``sigma2`` and jumps
governed by ``nu``.  All functionals below are in natural-log units; the
``*_bits`` accessors convert to base 2.

Every functional accepts ``method="auto"`` (closed form where one exists,
quadrature otherwise) or ``method="quad"`` (always quadrature, used to
cross-check the closed forms).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from .errors import InvalidModelError, QuadratureError, ZeroTailMassError

LOG2E = 1.0 / math.log(2.0)

QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-10
# Dyadic shells (R, 2R] are integrated up to R = 2**MAX_SHELLS before
# declaring a tail integral divergent.
MAX_SHELLS = 40


# --------------------------------------------------------------------------
# jump laws (for compound Poisson measures)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPoint:
    """Law putting mass ``prob_a`` on ``a`` and ``1 - prob_a`` on ``b``."""

    a: float
    prob_a: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.prob_a <= 1.0:
            raise InvalidModelError(f"prob_a must lie in [0, 1], got {self.prob_a}")
        for value, weight in ((self.a, self.prob_a), (self.b, 1.0 - self.prob_a)):
            if weight > 0 and value == 0:
                raise InvalidModelError("jump laws may not charge the origin")

    def atoms(self):
        pairs = [(self.a, self.prob_a), (self.b, 1.0 - self.prob_a)]
        pairs = [(v, w) for v, w in pairs if w > 0]
        return np.array([v for v, _ in pairs]), np.array([w for _, w in pairs])


@dataclass(frozen=True)
class Exponential:
    """``sign * E`` with ``E`` exponential of the given mean."""

    mean: float
    sign: int = 1

    def __post_init__(self):
        if not self.mean > 0:
            raise InvalidModelError(f"exponential mean must be positive, got {self.mean}")
        if self.sign not in (1, -1):
            raise InvalidModelError(f"sign must be +1 or -1, got {self.sign}")

    def density_pair(self, u):
        d = np.exp(-u / self.mean) / self.mean
        zero = np.zeros_like(d)
        return (d, zero) if self.sign > 0 else (zero, d)


@dataclass(frozen=True)
class NormalLaw:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidModelError(f"normal sd must be positive, got {self.sd}")

    def density_pair(self, u):
        z_pos = (u - self.mean) / self.sd
        z_neg = (-u - self.mean) / self.sd
        c = 1.0 / (self.sd * math.sqrt(2.0 * math.pi))
        return c * np.exp(-0.5 * z_pos**2), c * np.exp(-0.5 * z_neg**2)


@dataclass(frozen=True)
class Tabulated:
    """Finite law given by ``(value, weight)`` atoms."""

    atoms_: tuple

    def __init__(self, atoms):
        pairs = tuple((float(v), float(w)) for v, w in atoms)
        object.__setattr__(self, "atoms_", pairs)
        if not pairs:
            raise InvalidModelError("tabulated law needs at least one atom")
        for v, w in pairs:
            if v == 0:
                raise InvalidModelError("jump laws may not charge the origin")
            if not w > 0:
                raise InvalidModelError(f"atom weights must be positive, got {w}")
        total = sum(w for _, w in pairs)
        if abs(total - 1.0) > 1e-12:
            raise InvalidModelError(f"atom weights sum to {total!r}, expected 1")

    def atoms(self):
        return np.array([v for v, _ in self.atoms_]), np.array([w for _, w in self.atoms_])


JumpLaw = Union[TwoPoint, Exponential, NormalLaw, Tabulated]


# --------------------------------------------------------------------------
# Levy measures
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Stable:
    """Density ``(c_minus 1{x<0} + c_plus 1{x>0}) |x|^(-alpha-1)``."""

    alpha: float
    c_minus: float
    c_plus: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise InvalidModelError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.c_minus < 0 or self.c_plus < 0 or self.c_minus + self.c_plus <= 0:
            raise InvalidModelError("need c_minus, c_plus >= 0 with positive sum")

    @property
    def total(self):
        return self.c_minus + self.c_plus

    def density_pair(self, u):
        base = u ** (-self.alpha - 1.0)
        return self.c_plus * base, self.c_minus * base


@dataclass(frozen=True)
class GammaStandard:
    """Density ``x^-1 e^-x`` on the positive half-line."""

    def density_pair(self, u):
        d = np.exp(-u) / u
        return d, np.zeros_like(d)


@dataclass(frozen=True)
class CompoundPoisson:
    intensity: float
    jump_law: JumpLaw

    def __post_init__(self):
        if not (self.intensity > 0 and math.isfinite(self.intensity)):
            raise InvalidModelError(f"intensity must be finite and positive, got {self.intensity}")

    def atoms(self):
        values, weights = self.jump_law.atoms()
        return values, self.intensity * weights

    @property
    def is_atomic(self):
        return isinstance(self.jump_law, (TwoPoint, Tabulated))

    def density_pair(self, u):
        pos, neg = self.jump_law.density_pair(u)
        return self.intensity * pos, self.intensity * neg

    def breakpoints(self):
        if isinstance(self.jump_law, NormalLaw):
            return [abs(self.jump_law.mean)]
        return []


@dataclass(frozen=True)
class GaussianOnly:
    """The zero Levy measure."""


LevyMeasureSpec = Union[Stable, GammaStandard, CompoundPoisson, GaussianOnly]


@dataclass(frozen=True)
class LevyTriplet:
    measure: LevyMeasureSpec
    sigma2: float = 0.0
    b: float = 0.0
    allow_degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise InvalidModelError(f"sigma2 must be non-negative, got {self.sigma2}")
        if (isinstance(self.measure, GaussianOnly) and self.sigma2 == 0 and self.b == 0
                and not self.allow_degenerate):
            raise InvalidModelError(
                "the zero process needs allow_degenerate=True")

    @property
    def is_symmetric(self):
        m = self.measure
        if isinstance(m, GaussianOnly):
            return True
        if isinstance(m, Stable):
            return m.c_minus == m.c_plus
        if isinstance(m, CompoundPoisson):
            law = m.jump_law
            if isinstance(law, NormalLaw):
                return law.mean == 0
            if isinstance(law, (TwoPoint, Tabulated)):
                v, w = law.atoms()
                table = {}
                for vi, wi in zip(v, w):
                    table[vi] = table.get(vi, 0.0) + wi
                return all(math.isclose(table.get(-vi, 0.0), wi) for vi, wi in table.items())
        return False


# --------------------------------------------------------------------------
# generic quadrature route
# --------------------------------------------------------------------------

def _quad(fun, a, b, points=None):
    pts = None if math.isinf(b) else [p for p in (points or ()) if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(fun, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                             limit=400, points=pts, full_output=1)
    value, err = out[0], out[1]
    if len(out) > 3 and err > max(1e-12, 1e-8 * abs(value)):
        raise QuadratureError(f"quadrature on [{a:g}, {b:g}] failed to converge", err)
    return value


def _has_density(measure):
    if isinstance(measure, (Stable, GammaStandard)):
        return True
    return isinstance(measure, CompoundPoisson) and not measure.is_atomic


def _breakpoints(measure):
    return measure.breakpoints() if isinstance(measure, CompoundPoisson) else []


def _shell_tail(g, start, points):
    """Integrate ``g`` over ``(start, inf)`` shell by shell; ``inf`` if divergent."""
    total = 0.0
    lo = start
    prev = None
    prev_ratio = None
    ratio = math.inf
    for _ in range(MAX_SHELLS):
        hi = 2.0 * lo
        c = _quad(g, lo, hi, points)
        total += c
        if c == 0.0 or abs(c) <= 1e-14 * abs(total):
            return total
        if prev is not None and prev != 0.0:
            ratio = c / prev
            # exact power-law shells: sum the remaining geometric series now
            if prev_ratio is not None and abs(ratio - prev_ratio) <= 1e-9 * abs(ratio):
                break
            prev_ratio = ratio
        prev = c
        lo = hi
    if not 0.0 <= ratio < 1.0 - 1e-9:
        return math.inf
    # remaining tail in log coordinates, x = R e^y, where power laws decay exponentially
    R = hi

    def in_log(y):
        if y > 600.0:
            return 0.0
        x = R * math.exp(y)
        return g(x) * x

    return total + _quad(in_log, 0.0, math.inf)


def integrate_measure(measure, f: Callable[[float], float], lo: float, hi: float) -> float:
    """``int f(x) nu(dx)`` over ``{lo < |x| <= hi}``; ``hi`` may be ``inf``.

    Atomic measures are summed exactly; absolutely continuous measures go
    through adaptive Gauss-Kronrod with break points at the region ends
    (and at 1 for infinite regions).
    """
    if isinstance(measure, GaussianOnly) or hi <= lo:
        return 0.0
    if isinstance(measure, CompoundPoisson) and measure.is_atomic:
        values, weights = measure.atoms()
        mask = (np.abs(values) > lo) & (np.abs(values) <= hi)
        return float(sum(w * f(v) for v, w in zip(values[mask], weights[mask])))

    def g(u):
        pos, neg = measure.density_pair(u)
        out = 0.0
        if pos != 0.0:
            out += f(u) * pos
        if neg != 0.0:
            out += f(-u) * neg
        return out

    points = _breakpoints(measure)
    if math.isinf(hi):
        split = max(lo, 1.0)
        head = _quad(g, lo, split, points) if split > lo else 0.0
        return head + _shell_tail(g, split, points)
    return _quad(g, lo, hi, points)


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------

def _exp_law_moment(theta, lo, hi, k):
    """``E[E^k 1{lo < E <= hi}]`` for ``E`` exponential with mean ``theta``."""
    upper = 1.0 if math.isinf(hi) else special.gammainc(k + 1, hi / theta)
    return theta**k * special.gamma(k + 1) * (upper - special.gammainc(k + 1, lo / theta))


def _closed_form_available(measure):
    if isinstance(measure, (GaussianOnly, Stable, GammaStandard)):
        return True
    return isinstance(measure, CompoundPoisson) and (
        measure.is_atomic or isinstance(measure.jump_law, Exponential))


def _use_quad(measure, method):
    if method not in ("auto", "quad"):
        raise ValueError(f"unknown method {method!r}")
    return method == "quad" and _has_density(measure) or not _closed_form_available(measure)


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


# --------------------------------------------------------------------------
# functionals
# --------------------------------------------------------------------------

def tail_mass(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    """``nu([-eps, eps]^c)``, the intensity of jumps larger than ``eps``."""
    _check_eps(eps)
    m = triplet.measure
    if _use_quad(m, method):
        return integrate_measure(m, lambda x: 1.0, eps, math.inf)
    if isinstance(m, GaussianOnly):
        return 0.0
    if isinstance(m, Stable):
        return m.total * eps ** (-m.alpha) / m.alpha
    if isinstance(m, GammaStandard):
        return float(special.exp1(eps))
    law = m.jump_law
    if isinstance(law, Exponential):
        return m.intensity * math.exp(-eps / law.mean)
    return integrate_measure(m, lambda x: 1.0, eps, math.inf)


def small_jump_second_moment(triplet: LevyTriplet, delta: float, method: str = "auto") -> float:
    """``int_{|x| <= delta} x^2 nu(dx)`` (Gaussian part not included)."""
    _check_eps(delta)
    m = triplet.measure
    if _use_quad(m, method):
        return integrate_measure(m, lambda x: x * x, 0.0, delta)
    if isinstance(m, GaussianOnly):
        return 0.0
    if isinstance(m, Stable):
        return m.total * delta ** (2.0 - m.alpha) / (2.0 - m.alpha)
    if isinstance(m, GammaStandard):
        return float(special.gammainc(2.0, delta))
    law = m.jump_law
    if isinstance(law, Exponential):
        return m.intensity * _exp_law_moment(law.mean, 0.0, delta, 2)
    return integrate_measure(m, lambda x: x * x, 0.0, delta)


def f1(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    """``eps^-2 (sigma2 + int x^2 ^ eps^2 nu(dx))``."""
    inner = small_jump_second_moment(triplet, eps, method)
    return (triplet.sigma2 + inner) / eps**2 + tail_mass(triplet, eps, method)


def f2(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    """``int_{|x| > eps} log(|x| / eps) nu(dx)`` in nats; may be ``inf``."""
    _check_eps(eps)
    m = triplet.measure
    if _use_quad(m, method) or isinstance(m, GammaStandard):
        return integrate_measure(m, lambda x: math.log(abs(x) / eps), eps, math.inf)
    if isinstance(m, GaussianOnly):
        return 0.0
    if isinstance(m, Stable):
        return m.total * eps ** (-m.alpha) / m.alpha**2
    law = m.jump_law
    if isinstance(law, Exponential):
        return m.intensity * float(special.exp1(eps / law.mean))
    return integrate_measure(m, lambda x: math.log(abs(x) / eps), eps, math.inf)


def f2_bits(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    return f2(triplet, eps, method) * LOG2E


def f_total(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    return f1(triplet, eps, method) + f2(triplet, eps, method)


def drift_compensation(triplet: LevyTriplet, eps: float, method: str = "auto") -> float:
    """Drift ``b(eps)`` that leaves the jumps of size ``<= eps`` compensated.

    ``b(eps) = b - int_{eps<|x|<=1} x nu(dx) + int_{1<|x|<=eps} x nu(dx)``.
    """
    _check_eps(eps)
    m = triplet.measure
    lo, hi = min(eps, 1.0), max(eps, 1.0)
    sign = 1.0 if eps > 1.0 else -1.0
    if isinstance(m, GaussianOnly) or eps == 1.0:
        return triplet.b
    if _use_quad(m, method):
        return triplet.b + sign * integrate_measure(m, lambda x: x, lo, hi)
    if isinstance(m, Stable):
        # int_1^eps x^-alpha dx, written to stay accurate near alpha = 1
        a = 1.0 - m.alpha
        log_eps = math.log(eps)
        ref = log_eps if a == 0 else math.expm1(a * log_eps) / a
        return triplet.b + (m.c_plus - m.c_minus) * ref
    if isinstance(m, GammaStandard):
        return triplet.b + math.exp(-1.0) - math.exp(-eps)
    law = m.jump_law
    if isinstance(law, Exponential):
        return triplet.b + sign * law.sign * m.intensity * _exp_law_moment(law.mean, lo, hi, 1)
    return triplet.b + sign * integrate_measure(m, lambda x: x, lo, hi)


def moment_diag(triplet: LevyTriplet, q: float, method: str = "auto") -> float:
    """``int_{|x| > 1} |x|^q nu(dx)``; finite iff ``E sup|X|^q < inf``."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    m = triplet.measure
    if _use_quad(m, method):
        return integrate_measure(m, lambda x: abs(x) ** q, 1.0, math.inf)
    if isinstance(m, GaussianOnly):
        return 0.0
    if isinstance(m, Stable):
        return m.total / (m.alpha - q) if q < m.alpha else math.inf
    if isinstance(m, GammaStandard):
        return float(special.gammaincc(q, 1.0) * special.gamma(q))
    law = m.jump_law
    if isinstance(law, Exponential):
        return m.intensity * law.mean**q * float(
            special.gammaincc(q + 1, 1.0 / law.mean) * special.gamma(q + 1))
    return integrate_measure(m, lambda x: abs(x) ** q, 1.0, math.inf)


def condition_b_ratio(triplet: LevyTriplet, mu: float, eps: float, method: str = "auto") -> float:
    """``int_{|x|>eps} (|x|/eps)^mu nu(dx) / nu([-eps, eps]^c)``.

    Raises ``ZeroTailMassError`` when there are no jumps above ``eps``.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    tail = tail_mass(triplet, eps, method)
    if tail == 0:
        raise ZeroTailMassError(f"tail mass vanishes at eps={eps}")
    m = triplet.measure
    if _use_quad(m, method):
        num = integrate_measure(m, lambda x: (abs(x) / eps) ** mu, eps, math.inf)
    elif isinstance(m, Stable):
        return m.alpha / (m.alpha - mu) if mu < m.alpha else math.inf
    elif isinstance(m, GammaStandard):
        num = eps ** (-mu) * float(special.gammaincc(mu, eps) * special.gamma(mu))
    elif isinstance(m.jump_law, Exponential):
        theta = m.jump_law.mean
        num = m.intensity * (theta / eps) ** mu * float(
            special.gammaincc(mu + 1, eps / theta) * special.gamma(mu + 1))
    else:
        num = integrate_measure(m, lambda x: (abs(x) / eps) ** mu, eps, math.inf)
    return num / tail


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def _law_to_dict(law):
    if isinstance(law, TwoPoint):
        return {"kind": "two_point", "a": law.a, "prob_a": law.prob_a, "b": law.b}
    if isinstance(law, Exponential):
        return {"kind": "exponential", "mean": law.mean, "sign": law.sign}
    if isinstance(law, NormalLaw):
        return {"kind": "normal", "mean": law.mean, "sd": law.sd}
    return {"kind": "tabulated", "atoms": [[v, w] for v, w in law.atoms_]}


def _law_from_dict(d):
    kind = d["kind"]
    if kind == "two_point":
        return TwoPoint(float(d["a"]), float(d["prob_a"]), float(d["b"]))
    if kind == "exponential":
        return Exponential(float(d["mean"]), int(d.get("sign", 1)))
    if kind == "normal":
        return NormalLaw(float(d["mean"]), float(d["sd"]))
    if kind == "tabulated":
        return Tabulated(d["atoms"])
    raise InvalidModelError(f"unknown jump law kind {kind!r}")


def measure_to_dict(m):
    if isinstance(m, Stable):
        return {"kind": "stable", "alpha": m.alpha, "c_minus": m.c_minus, "c_plus": m.c_plus}
    if isinstance(m, GammaStandard):
        return {"kind": "gamma"}
    if isinstance(m, CompoundPoisson):
        return {"kind": "compound_poisson", "intensity": m.intensity,
                "jump_law": _law_to_dict(m.jump_law)}
    return {"kind": "gaussian"}


def measure_from_dict(d):
    kind = d["kind"]
    if kind == "stable":
        return Stable(float(d["alpha"]), float(d["c_minus"]), float(d["c_plus"]))
    if kind == "gamma":
        return GammaStandard()
    if kind == "compound_poisson":
        return CompoundPoisson(float(d["intensity"]), _law_from_dict(d["jump_law"]))
    if kind == "gaussian":
        return GaussianOnly()
    raise InvalidModelError(f"unknown measure kind {kind!r}")


def triplet_to_dict(t: LevyTriplet) -> dict:
    d = {"measure": measure_to_dict(t.measure), "sigma2": t.sigma2, "b": t.b}
    if t.allow_degenerate:
        d["allow_degenerate"] = True
    return d


def triplet_from_dict(d: dict) -> LevyTriplet:
    return LevyTriplet(measure_from_dict(d["measure"]), float(d.get("sigma2", 0.0)),
                       float(d.get("b", 0.0)), bool(d.get("allow_degenerate", False)))


def dumps(t: LevyTriplet) -> str:
    return json.dumps(triplet_to_dict(t), sort_keys=True)


def loads(s: str) -> LevyTriplet:
    return triplet_from_dict(json.loads(s))
