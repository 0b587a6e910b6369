"""Estimators of the complex channel gain for pilot-assisted M-PSK frames.

The central routine is :func:`mackenthun`, an O(L log L) exact minimiser
of the least-squares objective

    SS(a, d) = sum_i |y_i - a*s_i|^2

jointly over the gain ``a`` and the unknown data symbols, following
Mackenthun's candidate-sweep construction extended with pilot terms and
an optional pilot/data weighting.  Two deliberately independent oracles
(:func:`brute_force`, :func:`naive_enumeration`), the pilot-only closed
form and the Viterbi&Viterbi phase estimator complete the family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import TWO_PI, grid_index, wrap_frac, wrap_pi
from .model import ReceivedFrame, psk_points

__all__ = [
    "ComplexAmplitude",
    "EstimateReport",
    "hard_decision",
    "mackenthun",
    "brute_force",
    "naive_enumeration",
    "pilot_only",
    "viterbi_viterbi",
    "sum_of_squares",
]

BRUTE_FORCE_LIMIT = 10_000_000


@dataclass(frozen=True)
class ComplexAmplitude:
    """Polar form of a complex gain estimate: ``rho * exp(1j*theta)``.

    ``rho`` is nonnegative and ``theta`` lies in ``[-pi, pi)``; a zero
    ``rho`` only occurs in the measure-zero degenerate case flagged on
    the enclosing report.
    """

    rho: float
    theta: float

    def __post_init__(self):
        if not np.isfinite(self.rho) or self.rho < 0:
            raise ValueError("rho must be a nonnegative finite real")
        object.__setattr__(self, "theta", wrap_pi(float(self.theta)))

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexAmplitude":
        return cls(rho=abs(z), theta=float(np.angle(z)) if z != 0 else 0.0)

    @property
    def gain(self) -> complex:
        return self.rho * np.exp(1j * self.theta)


@dataclass(frozen=True)
class EstimateReport:
    """Joint estimate of the gain and the data symbols.

    Attributes
    ----------
    amplitude : ComplexAmplitude
        The estimated gain.
    objective : float
        Value of the maximised criterion ``|Y|^2 / L`` at the optimum,
        where ``Y`` accumulates ``y_i * conj(s_i)`` over the frame.
        Minimising the sum of squares is equivalent to maximising it.
    data_indices : ndarray of int or None
        Decided constellation indices over the data positions.
    data_decisions : ndarray of complex or None
        The corresponding constellation points.
    candidate_index : int or None
        Position of the winning candidate in the sweep order (0 is the
        hard-decision sequence at zero trial phase).
    degenerate : bool
        True when ``|Y| = 0`` at the optimum and the gain is reported
        as ``rho=0, theta=0``.
    objective_trace : ndarray or None
        Per-candidate objective sequence, recorded when requested.
    """

    amplitude: ComplexAmplitude
    objective: float
    data_indices: np.ndarray | None = None
    data_decisions: np.ndarray | None = None
    candidate_index: int | None = None
    degenerate: bool = False
    objective_trace: np.ndarray | None = None


def hard_decision(y: complex, theta: float, m: int) -> complex:
    """Constellation point nearest to ``y`` after derotation by ``theta``.

    Minimises ``|y - rho*exp(1j*theta)*d|`` over the alphabet for any
    positive ``rho``.  For ``y == 0`` every symbol is optimal and the
    point with index 0 is returned.
    """
    points = psk_points(m)
    phi = float(np.angle(np.exp(-1j * theta) * y))
    return points[grid_index(phi, m) % m]


def _sweep_setup(frame: ReceivedFrame, m: int, beta: float):
    """Shared preparation for the candidate-sweep estimators."""
    if frame.plan.length < 1:
        raise ValueError("frame must contain at least one symbol")
    if beta <= 0 or not np.isfinite(beta):
        raise ValueError("beta must be a positive finite real")
    y = frame.samples
    plan = frame.plan
    y_data = y[plan.data_positions]
    if plan.pilot_count:
        pilot_sum = complex(np.sum(y[plan.pilot_positions] * np.conj(plan.pilot_symbols)))
    else:
        pilot_sum = 0.0 + 0.0j
    phi = np.angle(y_data)
    idx0 = np.asarray(grid_index(phi, m), dtype=np.int64).reshape(-1)
    residual = phi - (TWO_PI / m) * idx0
    order = np.argsort(residual, kind="stable")
    # derotation by the hard decision: conj of the constellation point
    g0 = beta * y_data * np.conj(psk_points(m)[idx0 % m])
    return y_data, pilot_sum, idx0, order, g0


def _finalise(frame, m, beta, idx, candidate_index, trace_values, trace):
    """Build the report, recomputing the optimum from the decided symbols.

    The recursive sweep only selects the winning candidate; its gain and
    objective are evaluated afresh from the decisions so that every
    estimator reports bit-identical values for identical decisions.
    """
    plan = frame.plan
    points = psk_points(m)
    idx = np.asarray(idx, dtype=np.int64) % m
    decisions = points[idx]
    if plan.pilot_count:
        y_big = complex(
            np.sum(frame.samples[plan.pilot_positions] * np.conj(plan.pilot_symbols))
        )
    else:
        y_big = 0.0 + 0.0j
    if plan.data_count:
        y_big += beta * complex(
            np.sum(frame.samples[plan.data_positions] * np.conj(decisions))
        )
    objective = abs(y_big) ** 2 / plan.length
    denom = plan.pilot_count + beta * plan.data_count
    a_hat = y_big / denom
    degenerate = a_hat == 0
    amplitude = (
        ComplexAmplitude(rho=0.0, theta=0.0)
        if degenerate
        else ComplexAmplitude.from_complex(a_hat)
    )
    if trace_values is None:
        trace_values = [objective]
    return EstimateReport(
        amplitude=amplitude,
        objective=float(objective),
        data_indices=idx,
        data_decisions=decisions,
        candidate_index=int(candidate_index),
        degenerate=bool(degenerate),
        objective_trace=np.asarray(trace_values, dtype=float) if trace else None,
    )


def _indices_at_candidate(idx0, order, k):
    """Decisions of the k-th sweep candidate: each hit rotates one symbol."""
    idx = idx0.copy()
    if k > 0:
        full, rem = divmod(k, len(order))
        idx -= full
        idx[order[:rem]] -= 1
    return idx


def _first_near_max(objective, y_scale, length):
    """Index of the first candidate whose objective ties the maximum.

    Without pilots, each decision class recurs ``m`` times in the sweep
    with mathematically equal objectives, and the final candidate always
    recreates the first; under exact arithmetic the strict-improvement
    rule would keep the earliest occurrence.  Ties are therefore taken
    up to the accumulated floating-point drift, whose scale follows from
    ``y_scale``, an upper bound on the magnitudes entering ``Y``.
    """
    top = float(np.max(objective))
    drift = 4.0 * np.finfo(float).eps * y_scale
    tol = (2.0 * np.sqrt(top * length) * drift + drift * drift) / length
    return int(np.argmax(objective >= top - tol))


def mackenthun(
    frame: ReceivedFrame, m: int, beta: float = 1.0, *, trace: bool = False
) -> EstimateReport:
    """Exact least-squares gain and data estimate in O(L log L).

    Sweeps the at most ``m * |D|`` candidate hard-decision sequences in
    ascending order of the per-symbol phase residuals, updating the
    accumulated statistic ``Y`` in O(1) per candidate, and returns the
    candidate maximising ``|Y|^2 / L``.

    Parameters
    ----------
    frame : ReceivedFrame
        Received samples and their frame plan.  With no pilots the
        estimate carries the usual ``2*pi/m`` phase ambiguity and one
        representative is returned.
    m : int
        Constellation size.
    beta : float, optional
        Weight applied to the data terms of the objective.  ``beta=1``
        is the plain least-squares estimator; smaller values trust the
        pilots more.  Only the data scaling and the normalisation
        ``|P| + beta*|D|`` change.
    trace : bool, optional
        Record the per-candidate objective sequence on the report.

    Returns
    -------
    EstimateReport
    """
    plan = frame.plan
    if plan.pilot_count == 0 and plan.data_count == 0:
        raise ValueError("frame must contain at least one symbol")
    y_data, pilot_sum, idx0, order, g0 = _sweep_setup(frame, m, beta)
    n_data = plan.data_count
    if n_data == 0:
        return _finalise(frame, m, beta, np.empty(0, np.int64), 0, None, trace)
    y0 = pilot_sum + complex(np.sum(g0))
    eta = np.exp(2j * np.pi / m) - 1.0
    # increment at sweep step k: eta * g0[order[k % n]] * exp(2j*pi*(k//n)/m);
    # each full pass over the sorted residuals rotates every data symbol
    # once.  Candidate objectives are produced tile by tile so the hot
    # arrays stay cache resident for any frame length; a first scan finds
    # the maximum and a bit-identical replay locates its first occurrence.
    sorted_g = g0[order]
    inv_len = 1.0 / plan.length
    tile = 4096
    buf = np.empty(min(tile, n_data), dtype=complex)
    seg = np.empty(min(tile, n_data))

    def scan_tiles():
        """Yield (start_index, objective_tile); replays are bit-identical."""
        carry = y0
        for j in range(m):
            rot = eta * np.exp(2j * np.pi * j / m)
            base = 1 + j * n_data
            for lo in range(0, n_data, tile):
                hi = min(lo + tile, n_data)
                chunk = buf[: hi - lo]
                np.multiply(sorted_g[lo:hi], rot, out=chunk)
                np.cumsum(chunk, out=chunk)
                chunk += carry
                carry = complex(chunk[-1])
                out = seg[: hi - lo]
                np.add(np.square(chunk.real), np.square(chunk.imag), out=out)
                out *= inv_len
                yield base + lo, out

    first = abs(y0) ** 2 * inv_len
    top = first
    for _, values in scan_tiles():
        top = max(top, float(np.max(values)))
    y_scale = abs(y0) + float(np.sum(np.abs(sorted_g))) * abs(eta) * m
    threshold = top - _drift_tolerance(top, y_scale, plan.length)
    trace_values = np.empty(m * n_data + 1) if trace else None
    if trace_values is not None:
        trace_values[0] = first
    best = 0 if first >= threshold else None
    for start, values in scan_tiles():
        if trace_values is not None:
            trace_values[start : start + len(values)] = values
        if best is None:
            hit = np.nonzero(values >= threshold)[0]
            if len(hit):
                best = start + int(hit[0])
        if best is not None and trace_values is None:
            break
    idx = _indices_at_candidate(idx0, order, best)
    return _finalise(frame, m, beta, idx, best, trace_values, trace)


def naive_enumeration(
    frame: ReceivedFrame, m: int, *, trace: bool = False
) -> EstimateReport:
    """Reference sweep recomputing the objective from scratch per candidate.

    Walks the same candidate sequences as :func:`mackenthun` (beta=1) in
    the same order, but evaluates ``Y`` by direct summation at each step,
    costing O(L) per candidate.  Serves as an independent check of the
    recursive update.
    """
    plan = frame.plan
    if plan.pilot_count == 0 and plan.data_count == 0:
        raise ValueError("frame must contain at least one symbol")
    y_data, pilot_sum, idx0, order, _ = _sweep_setup(frame, m, 1.0)
    n_data = plan.data_count
    if n_data == 0:
        return _finalise(frame, m, 1.0, np.empty(0, np.int64), 0, None, trace)
    points = psk_points(m)

    def from_scratch(idx):
        return pilot_sum + complex(np.sum(y_data * np.conj(points[idx % m])))

    idx = idx0.copy()
    objective = np.empty(m * n_data + 1)
    objective[0] = abs(from_scratch(idx)) ** 2 / plan.length
    for k in range(m * n_data):
        idx[order[k % n_data]] -= 1
        objective[k + 1] = abs(from_scratch(idx)) ** 2 / plan.length
    y_scale = abs(pilot_sum) + float(np.sum(np.abs(y_data)))
    best = _first_near_max(objective, y_scale, plan.length)
    idx = _indices_at_candidate(idx0, order, best)
    return _finalise(frame, m, 1.0, idx, best, objective, trace)


def brute_force(
    frame: ReceivedFrame, m: int, *, max_candidates: int = BRUTE_FORCE_LIMIT
) -> EstimateReport:
    """Globally optimal estimate by exhausting all ``m**|D|`` assignments.

    For every data assignment the optimal gain has the closed form
    ``Y / L``, so the search reduces to maximising ``|Y|^2`` over the
    full assignment grid.  Ground-truth oracle; refuses frames whose
    candidate count exceeds ``max_candidates``.
    """
    plan = frame.plan
    if plan.pilot_count == 0 and plan.data_count == 0:
        raise ValueError("frame must contain at least one symbol")
    n_data = plan.data_count
    if m**n_data > max_candidates:
        raise ValueError(
            f"{m}**{n_data} candidate assignments exceed the limit {max_candidates}"
        )
    points = psk_points(m)
    y_data = frame.data_samples
    if plan.pilot_count:
        pilot_sum = complex(
            np.sum(frame.pilot_samples * np.conj(plan.pilot_symbols))
        )
    else:
        pilot_sum = 0.0 + 0.0j
    # accumulate Y over all assignments; data position i is digit i,
    # most significant first
    y_all = np.array([pilot_sum])
    for i in range(n_data):
        y_all = (y_all[:, None] + (y_data[i] * np.conj(points))[None, :]).ravel()
    objective = np.abs(y_all) ** 2 / plan.length
    best = int(np.argmax(objective))
    idx = np.empty(n_data, dtype=np.int64)
    rem = best
    for i in range(n_data - 1, -1, -1):
        idx[i] = rem % m
        rem //= m
    return _finalise(frame, m, 1.0, idx, best, objective, trace=False)


def pilot_only(frame: ReceivedFrame) -> ComplexAmplitude:
    """Closed-form gain estimate from the pilot positions alone."""
    plan = frame.plan
    if plan.pilot_count == 0:
        raise ValueError("pilot_only requires at least one pilot symbol")
    a_hat = complex(
        np.sum(frame.pilot_samples * np.conj(plan.pilot_symbols))
    ) / plan.pilot_count
    return ComplexAmplitude.from_complex(a_hat)


def viterbi_viterbi(frame: ReceivedFrame, m: int, weighting: str = "one") -> float:
    """Noncoherent phase estimate via the m-th power nonlinearity.

    Strips the modulation by raising each normalised sample to the m-th
    power, averages with an amplitude weight ``F(|y|)``, and returns one
    m-th of the resulting angle, in ``[-pi/m, pi/m)``.  Pilot symbols,
    if present, are treated like data.  Zero samples are skipped.

    Parameters
    ----------
    weighting : {"one", "linear", "power"}
        ``F(x) = 1`` (default), ``F(x) = x`` or ``F(x) = x**m``.
    """
    psk_points(m)  # validates m
    y = frame.samples
    mag = np.abs(y)
    keep = mag > 0
    y, mag = y[keep], mag[keep]
    if weighting == "one":
        weight = 1.0
    elif weighting == "linear":
        weight = mag
    elif weighting == "power":
        weight = mag**m
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    acc = np.sum(weight * (y / mag) ** m) / frame.plan.length
    if acc == 0:
        return 0.0
    return wrap_frac(float(np.angle(acc)) / m, m)


def sum_of_squares(frame: ReceivedFrame, gain: complex, data_decisions) -> float:
    """Direct evaluation of ``sum_i |y_i - gain*s_i|^2``.

    ``data_decisions`` supplies the symbols at the data positions; the
    pilot positions use the plan's known values.
    """
    plan = frame.plan
    data_decisions = np.asarray(data_decisions, dtype=complex)
    if len(data_decisions) != plan.data_count:
        raise ValueError("one decision required per data position")
    symbols = np.empty(plan.length, dtype=complex)
    symbols[plan.pilot_positions] = plan.pilot_symbols
    symbols[plan.data_positions] = data_decisions
    return float(np.sum(np.abs(frame.samples - gain * symbols) ** 2))
