"""Compiled sweeps over piecewise-linear cadlag paths.

A path is ``y(t) = drift * t + sum(increments[times <= t])``.  Both kernels
walk the event list once, solving for boundary crossings of the linear
pieces in closed form.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def grid_index(x, eps):
    """Index of the nearest point of ``eps * Z``; ties go away from zero."""
    q = math.floor(abs(x) / eps + 0.5)
    return q if x >= 0 else -q


@numba.njit(cache=True)
def exit_sweep(times, increments, drift, eps):
    """Successive exits from ``[anchor - 2 eps, anchor + 2 eps]``.

    Returns ``(exit_times, anchors)`` where ``anchors[i]`` is the grid index
    of the path value at ``exit_times[i]``; the initial anchor is 0.
    """
    n = times.shape[0]
    cap = n + int(abs(drift) / (2.0 * eps)) + 8
    s_out = np.empty(cap, dtype=np.float64)
    k_out = np.empty(cap, dtype=np.float64)
    m = 0
    k = 0.0
    y = 0.0
    t = 0.0
    for j in range(n + 1):
        t_end = times[j] if j < n else 1.0
        # linear piece on [t, t_end)
        if drift != 0.0:
            while True:
                if drift > 0.0:
                    target = (k + 2.0) * eps
                    step = 2.0
                else:
                    target = (k - 2.0) * eps
                    step = -2.0
                dt = (target - y) / drift
                if dt < 0.0:
                    dt = 0.0
                if t + dt >= t_end:
                    break
                t = t + dt
                y = target
                k = k + step
                if m == cap:
                    return s_out[:m], k_out[:m]
                s_out[m] = t
                k_out[m] = k
                m += 1
        y += drift * (t_end - t)
        t = t_end
        if j == n:
            break
        y += increments[j]
        if abs(y - k * eps) >= 2.0 * eps:
            k_new = grid_index(y, eps)
            if abs(k_new - k) < 2.0:
                k_new = k + (2.0 if y > k * eps else -2.0)
            k = k_new
            if m == cap:
                return s_out[:m], k_out[:m]
            s_out[m] = t
            k_out[m] = k
            m += 1
    return s_out[:m], k_out[:m]


@numba.njit(cache=True)
def first_passage(times, increments, drift, level):
    """``inf{t in [0, 1) : |y(t)| >= level}``, or ``inf`` if never reached."""
    n = times.shape[0]
    y = 0.0
    t = 0.0
    for j in range(n + 1):
        t_end = times[j] if j < n else 1.0
        if drift != 0.0:
            target = level if drift > 0.0 else -level
            dt = (target - y) / drift
            if dt < 0.0:
                dt = 0.0
            if t + dt < t_end:
                return t + dt
        y += drift * (t_end - t)
        t = t_end
        if j == n:
            break
        y += increments[j]
        if abs(y) >= level:
            return t
    return math.inf
