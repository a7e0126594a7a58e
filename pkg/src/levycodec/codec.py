"""The exit-time codec for Levy paths.

A path is reduced to the times ``S_i`` at which its drift-corrected version
``X'_t = X_t - b_eps * t`` leaves a band of half-width ``2 eps`` around the
last grid anchor, and to the grid moves ``H_i`` made at those times.  The
times are rounded up to short dyadic numbers inside boxes of width
``1 / ceil(m)``; every record is ``'0' + height code + time code`` and every
box is closed by ``'1'``.  The reconstruction

    Xhat_t = b_eps * t + sum_i H_i 1{Shat_i <= t}

stays within ``3 eps`` of the path in ``L^p[0, 1]``.

Two time codes are available.  ``"self_delimiting"`` (the default) writes
the dyadic offset through the odd-numerator index of :func:`dyadic_index`
in an unsigned universal code and needs no side information.
``"prefixed"`` writes the fixed-grid code of :func:`encode_dyadic` preceded
by its grid exponent; it is kept for comparison and costs several extra
bits per record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .bitstream import (
    FLAG_PREFIXED_TIMES,
    FLAG_QUANT_MODE,
    FLAG_TRUNCATED,
    BitStream,
    Container,
)
from .errors import InvalidModelError, MalformedStreamError, ResolutionError
from .levy_model import LOG2E
from .path_sim import CadlagPath

TIME_CODES = ("self_delimiting", "prefixed")
# smallest admissible time window, in box units
MIN_WINDOW = 2.0**-60
_MAX_DYADIC_LEVEL = 62


@dataclass(frozen=True)
class Truncation:
    """Quantization-mode caps: give up when ``M > c1 F`` or a log-complexity sum exceeds ``c2 F``."""

    c1: float
    c2: float
    f_total: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise InvalidModelError("truncation constants must be positive")
        if not (self.f_total >= 0 and math.isfinite(self.f_total)):
            raise InvalidModelError("truncation needs a finite F(eps)")


@dataclass(frozen=True)
class CodecParams:
    eps: float
    b_eps: float
    m: float
    p: float = 1.0
    truncation: Optional[Truncation] = None
    time_code: str = "self_delimiting"

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidModelError(f"eps must be positive, got {self.eps}")
        if not (self.m > 0 and math.isfinite(self.m)):
            raise InvalidModelError(f"m must be positive and finite, got {self.m}")
        if not self.p >= 1:
            raise InvalidModelError(f"p must be at least 1, got {self.p}")
        if not math.isfinite(self.b_eps):
            raise InvalidModelError("b_eps must be finite")
        if self.time_code not in TIME_CODES:
            raise InvalidModelError(f"time_code must be one of {TIME_CODES}")

    @property
    def boxes(self) -> int:
        return math.ceil(self.m)

    @property
    def quant_mode(self) -> bool:
        return self.truncation is not None


@dataclass(frozen=True)
class JumpRecord:
    s: float
    s_hat: float
    h: float
    z: int  # h / eps


@dataclass(frozen=True)
class Reconstruction:
    """Decoded approximation; ``symbols`` holds ``(box, z, time symbol)`` per record."""

    b_eps: float
    s_hat: tuple
    h: tuple
    z: tuple
    truncated_to_zero: bool = False
    symbols: tuple = field(default=(), repr=False)

    @property
    def jumps(self):
        return list(zip(self.s_hat, self.h))

    @property
    def M(self):
        return len(self.s_hat)

    def to_path(self) -> CadlagPath:
        if self.truncated_to_zero:
            return CadlagPath([], [], 0.0)
        return CadlagPath(np.array(self.s_hat), np.array(self.h), self.b_eps)

    def value_at(self, t: float) -> float:
        if self.truncated_to_zero:
            return 0.0
        return self.b_eps * t + sum(h for s, h in zip(self.s_hat, self.h) if s <= t)


# --------------------------------------------------------------------------
# grid and exits
# --------------------------------------------------------------------------

def grid_project(x: float, eps: float) -> float:
    """Nearest point of ``eps * Z``; ties are broken away from zero."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return float(_kernels.grid_index(float(x), float(eps))) * eps


def _exit_arrays(path: CadlagPath, eps: float):
    s, k = _kernels.exit_sweep(path.times, path.increments, path.drift_rate, float(eps))
    z = np.diff(k, prepend=0.0).astype(np.int64)
    return s, z


def detect_exits(path_minus_drift: CadlagPath, eps: float):
    """Exit records ``[(S_i, H_i)]`` and their count ``M``."""
    s, z = _exit_arrays(path_minus_drift, eps)
    return [(float(si), float(zi) * eps) for si, zi in zip(s, z)], len(s)


# --------------------------------------------------------------------------
# integer and dyadic codes
# --------------------------------------------------------------------------

def _magnitude_code(a: int) -> str:
    """``n`` ones, a zero, and the ``n - 1`` low bits of ``a >= 1``."""
    n = a.bit_length()
    return "1" * n + "0" + format(a, "b")[1:]


def _read_magnitude(stream: BitStream) -> int:
    n = stream.read_unary()
    if n == 0:
        return 0
    rest = stream.read(n - 1)
    return int("1" + rest, 2)


def encode_integer(z: int) -> str:
    """Signed universal code of length ``2n + 1``, ``n`` the bit length of ``|z|``."""
    z = int(z)
    if z == 0:
        return "00"
    return ("1" if z < 0 else "0") + _magnitude_code(abs(z))


def decode_integer(stream: BitStream) -> int:
    sign = stream.read(1)
    a = _read_magnitude(stream)
    if a == 0:
        if sign != "0":
            raise MalformedStreamError("'10' is not a valid integer code")
        return 0
    return -a if sign == "1" else a


def encode_unsigned(j: int) -> str:
    """Universal code for ``j >= 0``: ``"0"`` for zero, else the magnitude code."""
    if j < 0:
        raise ValueError("encode_unsigned needs j >= 0")
    return "0" if j == 0 else _magnitude_code(j)


def decode_unsigned(stream: BitStream) -> int:
    return _read_magnitude(stream)


def _grid_level(delta: float) -> int:
    """``max(0, ceil(log2(1 / delta)))`` computed exactly."""
    if delta >= 1.0:
        return 0
    # delta = mant * 2**e with 0.5 <= mant < 1, so log2(1/delta) lies in (-e, 1 - e]
    return 1 - math.frexp(delta)[1]


def encode_dyadic(r: float, delta: float):
    """Fixed-grid dyadic code: returns ``(bits, v)`` with ``r <= v <= min(1, r + delta)``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    n_level = _grid_level(delta)
    q = min(math.ceil(math.ldexp(r, n_level)), 1 << n_level)
    return encode_integer(q + 1), math.ldexp(q, -n_level)


def decode_dyadic(stream: BitStream, delta: float) -> float:
    return _read_grid_value(stream, _grid_level(delta))


def _read_grid_value(stream, n_level):
    q = decode_integer(stream) - 1
    if not 0 <= q <= 1 << n_level:
        raise MalformedStreamError(f"grid value {q + 1} outside [1, 2^{n_level} + 1]")
    return math.ldexp(q, -n_level)


def dyadic_index(num: int, level: int) -> int:
    """Index of ``v = num / 2**level`` in ``[0, 1]``: 0 and 1 map to 0 and 1,
    an odd ``k / 2**n`` (n >= 1) maps to ``2**(n-1) + (k+1)/2``."""
    if num == 0:
        return 0
    while num % 2 == 0 and level > 0:
        num //= 2
        level -= 1
    if level == 0:
        if num != 1:
            raise ValueError("dyadic value outside [0, 1]")
        return 1
    if not 0 < num < 1 << level:
        raise ValueError("dyadic value outside [0, 1]")
    return (1 << (level - 1)) + (num + 1) // 2


def dyadic_from_index(j: int):
    """Inverse of :func:`dyadic_index`; returns ``(num, level)`` in lowest terms."""
    if j < 0:
        raise ValueError("index must be non-negative")
    if j <= 1:
        return j, 0
    level = (j - 1).bit_length()
    return 2 * (j - (1 << (level - 1))) - 1, level


# --------------------------------------------------------------------------
# time placement
# --------------------------------------------------------------------------

def _s_hat(box: int, v: float, boxes: int) -> float:
    return (box + v) / boxes


def _self_delimiting_time(s, s_next, prec, box, boxes):
    """Shortest dyadic offset with ``s <= Shat <= s + prec`` and ``Shat < s_next``."""
    r = s * boxes - box
    for level in range(_MAX_DYADIC_LEVEL + 1):
        base = math.ceil(math.ldexp(r, level))
        for num in (base - 1, base, base + 1):
            if num < 0 or num > 1 << level:
                continue
            sh = _s_hat(box, math.ldexp(num, -level), boxes)
            if s <= sh < s_next and sh - s <= prec:
                return dyadic_index(num, level), sh
    raise ResolutionError(f"no dyadic time within 2^-{_MAX_DYADIC_LEVEL} of S={s!r}")


def _prefixed_time(s, s_next, prec, box, boxes):
    r = s * boxes - box
    delta = 0.5 * boxes * min(s_next - s, prec)
    n_level = _grid_level(delta)
    q = min(math.ceil(math.ldexp(r, n_level)), 1 << n_level)
    sh = _s_hat(box, math.ldexp(q, -n_level), boxes)
    if sh < s and q < 1 << n_level:
        q += 1  # rounding in r; the damped window leaves room for one step
        sh = _s_hat(box, math.ldexp(q, -n_level), boxes)
    if not (s <= sh < s_next and sh - s <= prec):
        raise ResolutionError(f"fixed-grid time code cannot place S={s!r}")
    return (n_level, q), sh


def _time_bits(symbol, time_code):
    if time_code == "self_delimiting":
        return encode_unsigned(symbol)
    n_level, q = symbol
    return encode_integer(n_level + 1) + encode_integer(q + 1)


# --------------------------------------------------------------------------
# encoder
# --------------------------------------------------------------------------

def _records_and_symbols(s, z, params):
    eps, p, boxes = params.eps, params.p, params.boxes
    M = len(s)
    records, symbols = [], []
    place = _self_delimiting_time if params.time_code == "self_delimiting" else _prefixed_time
    for i in range(M):
        si = float(s[i])
        zi = int(z[i])
        s_next = float(s[i + 1]) if i + 1 < M else 1.0
        prec = (1.0 / abs(zi)) ** p / M  # eps^p / (|H_i|^p M)
        if boxes * min(s_next - si, prec) < MIN_WINDOW:
            raise ResolutionError(f"time window below 2^-60 box units at S={si!r}")
        box = min(int(math.floor(si * boxes)), boxes - 1)
        symbol, sh = place(si, s_next, prec, box, boxes)
        records.append(JumpRecord(si, sh, zi * eps, zi))
        symbols.append((box, zi, symbol))
    return records, symbols


def _write_symbols(symbols, params, stream):
    j = 0
    n_sym = len(symbols)
    for box in range(params.boxes):
        while j < n_sym and symbols[j][0] == box:
            _, zi, t = symbols[j]
            stream.write("0" + encode_integer(zi) + _time_bits(t, params.time_code))
            j += 1
        stream.write("1")


def _drift_removed(path: CadlagPath, params: CodecParams) -> CadlagPath:
    return path.without_drift(params.b_eps)


def encode_path(path: CadlagPath, params: CodecParams):
    """Encode ``path``; returns ``(stream, records)``.

    In quantization mode (``params.truncation`` set) the stream starts with
    a ``'0'`` mode bit; use :func:`encode_truncated` to allow the one-bit
    zero codeword.
    """
    s, z = _exit_arrays(_drift_removed(path, params), params.eps)
    records, symbols = _records_and_symbols(s, z, params)
    stream = BitStream()
    if params.quant_mode:
        stream.write("0")
    _write_symbols(symbols, params, stream)
    return stream, records


def encode_reconstruction(rec: Reconstruction, params: CodecParams) -> BitStream:
    """Re-emit the stream a reconstruction was decoded from."""
    stream = BitStream()
    if rec.truncated_to_zero:
        stream.write("1")
        return stream
    if params.quant_mode:
        stream.write("0")
    _write_symbols(list(rec.symbols), params, stream)
    return stream


# --------------------------------------------------------------------------
# decoder
# --------------------------------------------------------------------------

def decode(stream: BitStream, params: CodecParams) -> Reconstruction:
    stream.rewind()
    if params.quant_mode and stream.read(1) == "1":
        if stream.remaining:
            raise MalformedStreamError("bits after the zero codeword")
        return Reconstruction(0.0, (), (), (), truncated_to_zero=True)
    boxes = params.boxes
    s_hat, h, z, symbols = [], [], [], []
    box = 0
    last = -math.inf
    while box < boxes:
        if stream.remaining == 0:
            raise MalformedStreamError(f"stream ends inside box {box} of {boxes}")
        if stream.read(1) == "1":
            box += 1
            continue
        zi = decode_integer(stream)
        if abs(zi) < 2:
            raise MalformedStreamError(f"height multiple {zi} is not an exit move")
        if params.time_code == "self_delimiting":
            sym = decode_unsigned(stream)
            num, level = dyadic_from_index(sym)
            if num > 1 << level:
                raise MalformedStreamError(f"time index {sym} outside the box")
            v = math.ldexp(num, -level)
        else:
            n_level = decode_integer(stream) - 1
            if not 0 <= n_level <= _MAX_DYADIC_LEVEL:
                raise MalformedStreamError(f"grid exponent {n_level} out of range")
            v = _read_grid_value(stream, n_level)
            sym = (n_level, int(math.ldexp(v, n_level)))
        sh = _s_hat(box, v, boxes)
        if sh < last:
            raise MalformedStreamError("decoded times are not increasing")
        last = sh
        s_hat.append(sh)
        h.append(zi * params.eps)
        z.append(zi)
        symbols.append((box, zi, sym))
    if stream.remaining:
        raise MalformedStreamError(f"{stream.remaining} trailing bits after the last box")
    return Reconstruction(params.b_eps, tuple(s_hat), tuple(h), tuple(z), False, tuple(symbols))


# --------------------------------------------------------------------------
# bit accounting and quantization mode
# --------------------------------------------------------------------------

def _log2_plus(x):
    return math.log2(x) if x > 1.0 else 0.0


def audit_bit_bound(records, params: CodecParams, M: Optional[int] = None) -> float:
    """Observable upper bound on the stream length of an encode.

    ``ceil(m) + sum_i [2 log2|H_i/eps| + 2 log2+((1/m) / (eps^p/(M|H_i|^p) ^ (S_{i+1}-S_i))) + 8]``,
    plus the mode bit in quantization mode.
    """
    M = len(records) if M is None else M
    total = float(params.boxes) + (1.0 if params.quant_mode else 0.0)
    for i, rec in enumerate(records):
        s_next = records[i + 1].s if i + 1 < len(records) else 1.0
        prec = (params.eps / abs(rec.h)) ** params.p / M
        window = min(prec, s_next - rec.s)
        total += 2.0 * math.log2(abs(rec.z)) + 2.0 * _log2_plus(1.0 / (params.m * window)) + 8.0
    return total


def complexity_sums(s, z, m):
    """``(sum ln|H_i/eps|, sum [1 + ln+(1 / (m (S_{i+1} - S_i)))])`` in nats."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        return 0.0, 0.0
    heights = float(np.sum(np.log(np.abs(np.asarray(z, dtype=np.float64)))))
    gaps = np.diff(np.append(s, 1.0))
    positions = float(np.sum(1.0 + np.maximum(0.0, -np.log(m * gaps))))
    return heights, positions


def truncation_budget(params: CodecParams) -> float:
    """Worst-case stream length in quantization mode, a function of the parameters only."""
    t = params.truncation
    if t is None:
        raise ValueError("truncation_budget needs quantization-mode parameters")
    mf = t.c1 * t.f_total
    cap = t.c2 * t.f_total
    return (1.0 + params.boxes
            + (2.0 + 2.0 * params.p) * LOG2E * cap
            + 2.0 * mf * _log2_plus(mf / params.m)
            + 2.0 * LOG2E * cap
            + 8.0 * mf)


def encode_truncated(path: CadlagPath, params: CodecParams):
    """Quantization-mode encode: the one-bit zero codeword whenever a cap trips.

    Caps (all strict): ``M > c1 F``, ``sum ln|H_i/eps| > c2 F``,
    ``sum [1 + ln+(1/(m gap_i))] > c2 F``, and the stream length exceeding
    :func:`truncation_budget`.  Returns ``(stream, records, truncated)``.
    """
    t = params.truncation
    if t is None:
        raise ValueError("encode_truncated needs params.truncation")
    s, z = _exit_arrays(_drift_removed(path, params), params.eps)
    heights, positions = complexity_sums(s, z, params.m)
    F = t.f_total
    tripped = len(s) > t.c1 * F or heights > t.c2 * F or positions > t.c2 * F
    if not tripped:
        records, symbols = _records_and_symbols(s, z, params)
        stream = BitStream("0")
        _write_symbols(symbols, params, stream)
        if len(stream) <= truncation_budget(params):
            return stream, records, False
    return BitStream("1"), [], True


# --------------------------------------------------------------------------
# container
# --------------------------------------------------------------------------

def to_container(stream: BitStream, params: CodecParams, truncated: bool = False) -> Container:
    flags = ((FLAG_TRUNCATED if truncated else 0)
             | (FLAG_QUANT_MODE if params.quant_mode else 0)
             | (FLAG_PREFIXED_TIMES if params.time_code == "prefixed" else 0))
    return Container(flags, params.eps, params.b_eps, params.m, params.p, stream)


def params_from_container(c: Container) -> CodecParams:
    """Decoding parameters stored in a container.

    Quantization mode is restored with placeholder caps; the decoder only
    needs to know that a mode bit is present.
    """
    trunc = Truncation(1.0, 1.0, 0.0) if c.flags & FLAG_QUANT_MODE else None
    code = "prefixed" if c.flags & FLAG_PREFIXED_TIMES else "self_delimiting"
    return CodecParams(c.eps, c.b_eps, c.m, c.p, trunc, code)


def decode_container(data: bytes) -> Reconstruction:
    c = Container.from_bytes(data)
    rec = decode(c.stream, params_from_container(c))
    if rec.truncated_to_zero != bool(c.flags & FLAG_TRUNCATED):
        raise MalformedStreamError("truncation flag disagrees with the payload")
    return rec
