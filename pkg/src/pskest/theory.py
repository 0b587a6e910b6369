"""Asymptotic covariance theory for the least-squares gain estimator.

For i.i.d. circularly symmetric noise, write ``R*exp(1j*Phi) = 1 + w/rho0``
for a single normalised observation.  The limiting behaviour of the
estimator is governed by a handful of moments of ``(R, Phi)``:

* ``h1(x) = E R cos(x + Phi)`` and ``h2(x) = E R cos<x + Phi>`` where
  ``<.>`` wraps modulo ``2*pi/M``; their mixture ``G = p*h1 + d*h2``
  (pilot fraction ``p``, data fraction ``d``) is maximised at 0 and
  ``G(0)`` is the multiplicative bias of the amplitude estimate,
* the slope constant ``H = h2(0) - 2*sin(pi/M) * sum_k g(psi_k)`` with
  ``g`` the radial first-moment density of ``Phi`` and ``psi_k`` the
  decision boundaries ``2*pi*k/M + pi/M``,
* second moments ``A1 = E R^2 sin^2(Phi)``, ``A2 = E R^2 sin^2<Phi>``,
  ``B1 = E R^2 cos^2(Phi) - 1``, ``B2 = E R^2 cos^2<Phi> - h2(0)^2``.

Scaled by the frame length, the phase and amplitude errors are
asymptotically independent normals with variances
``(p*A1 + d*A2) / (p + H*d)^2 / L`` and ``rho0^2 (p*B1 + d*B2) / L``.

For Gaussian noise everything reduces to quadrature against closed-form
densities parameterised by ``kappa = rho0^2 / (2*sigma^2)``; for any
other circularly symmetric model the same figures are estimated by
Monte-Carlo sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .angles import wrap_frac, wrap_pi
from .model import NoiseModel

__all__ = [
    "KAPPA_FLOOR",
    "TheoryRangeError",
    "QuadratureError",
    "TheoryInput",
    "NoiseFigures",
    "FigureErrors",
    "CovariancePrediction",
    "gaussian_g",
    "gaussian_joint_pdf",
    "gaussian_h1",
    "gaussian_h2",
    "constants_gaussian",
    "constants_mc",
    "predict",
]

# below this SNR ratio the variance expressions stop being meaningful
# (p + H*d can reach zero and G need not have a unique maximum)
KAPPA_FLOOR = 0.01

QUAD_TOL = 1e-8
MC_CHUNK = 1 << 16


class TheoryRangeError(ValueError):
    """The asymptotic theory is not applicable at the requested point."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# Gaussian closed forms
# ---------------------------------------------------------------------------


def _check_kappa(kappa) -> float:
    kappa = float(kappa)
    if not np.isfinite(kappa) or kappa <= 0:
        raise ValueError("kappa must be a positive finite real")
    return kappa


def gaussian_g(phi, kappa):
    """Radial first-moment density ``g(phi)`` for Gaussian noise.

    ``g(phi) = integral_0^inf r^2 f_Z-weighted density``, evaluated in
    closed form:

        g(phi) = cos(phi)/(2*pi) * exp(-kappa)
               + Psi(sqrt(2*kappa)*cos(phi)) / sqrt(pi*kappa)
                 * exp(-kappa*sin(phi)^2) * (1/2 + kappa*cos(phi)^2)

    with ``Psi`` the standard normal CDF.  Even and 2*pi-periodic in
    ``phi``; satisfies ``integral cos(phi) g(phi) dphi = 1``.
    """
    kappa = _check_kappa(kappa)
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)
    val = (c / (2.0 * np.pi)) * np.exp(-kappa) + (
        ndtr(np.sqrt(2.0 * kappa) * c) / np.sqrt(np.pi * kappa)
    ) * np.exp(-kappa * np.sin(phi) ** 2) * (0.5 + kappa * c * c)
    # the density is nonnegative; cancellation can leave a tiny negative
    val = np.maximum(val, 0.0)
    return val if val.ndim else float(val)


def gaussian_joint_pdf(r, phi, kappa):
    """Joint density of ``(R, Phi)`` for Gaussian noise.

    ``f(r, phi) = (kappa*r/pi) * exp(-kappa*(r^2 - 2*r*cos(phi) + 1))``
    for ``r >= 0``; integrates to one over the half-plane.
    """
    kappa = _check_kappa(kappa)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    phi = np.asarray(phi, dtype=float)
    val = (kappa * r / np.pi) * np.exp(
        -kappa * (r * r - 2.0 * r * np.cos(phi) + 1.0)
    )
    return val if val.ndim else float(val)


def _wrap_kinks(m: int, shift: float = 0.0) -> list[float]:
    """Kink locations of ``phi -> <shift + phi>`` inside (-pi, pi)."""
    ks = np.arange(-(m + 1), m + 1)
    pts = (2 * ks + 1) * np.pi / m - shift
    return [float(p) for p in pts if -np.pi < p < np.pi]


def _peak_points(kappa: float) -> list[float]:
    """Refinement points bracketing the concentration of g near zero."""
    w = 1.0 / np.sqrt(kappa)
    return [x for x in (-10 * w, -3 * w, 3 * w, 10 * w) if -np.pi < x < np.pi]


def _piecewise_quad(f, points, tol=QUAD_TOL) -> float:
    """Adaptive quadrature over [-pi, pi] split at the given breakpoints."""
    edges = sorted({-np.pi, np.pi, *points})
    budget = tol / (len(edges) - 1)
    total = 0.0
    achieved = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = quad(f, lo, hi, epsabs=budget, limit=200)
        total += val
        achieved += err
    if achieved > tol:
        raise QuadratureError(
            f"requested absolute tolerance {tol:.1e}, achieved {achieved:.3e}"
        )
    return total


def gaussian_h1(x: float, kappa: float) -> float:
    """``h1(x) = E R cos(x + Phi)`` by quadrature against ``g``.

    Analytically equal to ``cos(x)``; computed numerically so it can
    serve as an independent sanity check.
    """
    kappa = _check_kappa(kappa)
    return _piecewise_quad(
        lambda p: np.cos(x + p) * gaussian_g(p, kappa), _peak_points(kappa)
    )


def gaussian_h2(x: float, m: int, kappa: float) -> float:
    """``h2(x) = E R cos<x + Phi>`` by quadrature against ``g``."""
    kappa = _check_kappa(kappa)
    pts = _wrap_kinks(m, shift=x) + _peak_points(kappa)
    return _piecewise_quad(
        lambda p: np.cos(wrap_frac(x + p, m)) * gaussian_g(p, kappa), pts
    )


def _gaussian_second_moment(m: int, kappa: float, trig) -> float:
    """2-D quadrature of ``trig(<phi>) * r^2 f(r, phi)`` over the half-plane.

    The radial integral is truncated at ``1 + 8/sqrt(2*kappa)``; the
    discarded Gaussian tail mass is below exp(-32).
    """
    r_max = 1.0 + 8.0 / np.sqrt(2.0 * kappa)

    def radial(phi):
        val, _ = quad(
            lambda r: r * r * gaussian_joint_pdf(r, phi, kappa),
            0.0,
            r_max,
            epsabs=QUAD_TOL / 10.0,
            limit=200,
        )
        return val

    pts = _wrap_kinks(m) + _peak_points(kappa)
    return _piecewise_quad(
        lambda p: trig(wrap_frac(p, m)) * radial(p), pts, tol=QUAD_TOL
    )


# ---------------------------------------------------------------------------
# Figures and predictions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureErrors:
    """Standard errors of Monte-Carlo figure estimates.

    ``h_bias_bound`` is the estimated magnitude of the O(delta^2)
    binning bias contributed to ``H`` by the density estimates at the
    decision boundaries, with ``bin_halfwidth = delta``.
    """

    h2_0: float
    A1: float
    A2: float
    B1: float
    B2: float
    H: float
    bin_halfwidth: float
    h_bias_bound: float
    reliable: bool = True


@dataclass(frozen=True)
class NoiseFigures:
    """Noise-dependent constants of the asymptotic covariance.

    Figures depend only on the constellation size and the noise law
    (summarised by ``kappa = rho0^2 / E|w|^2``); the pilot/data mixture
    enters later through :func:`predict`.
    """

    M: int
    kappa: float
    h1_0: float
    h2_0: float
    H: float
    A1: float
    A2: float
    B1: float
    B2: float
    g_boundary: tuple[float, ...]
    errors: FigureErrors | None = None

    def __post_init__(self):
        if self.A1 < -1e-9 or self.A2 < -1e-9:
            raise ValueError("second-moment figures must be nonnegative")
        if self.h2_0 < self.h1_0 - 1e-9:
            raise ValueError("h2(0) cannot be below h1(0)")

    def g_zero(self, p: float, d: float) -> float:
        """Amplitude bias factor ``G(0) = p*h1(0) + d*h2(0)``."""
        return p * self.h1_0 + d * self.h2_0


@dataclass(frozen=True)
class TheoryInput:
    """Operating point of the asymptotic predictions."""

    M: int
    p: float
    d: float
    kappa: float
    rho0: float

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.p < 0 or self.d < 0 or abs(self.p + self.d - 1.0) > 1e-12:
            raise ValueError("pilot and data fractions must be nonnegative and sum to 1")
        if not np.isfinite(self.rho0) or self.rho0 <= 0:
            raise ValueError("rho0 must be a positive finite real")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class CovariancePrediction:
    """Finite-length rendering of the limiting covariance.

    ``phase_var`` and ``amp_var`` are the limiting variances divided by
    the frame length; the phase/amplitude cross-covariance is zero.
    ``amp_mean`` is the limit ``rho0 * G(0)`` of the amplitude estimate.
    """

    phase_var: float
    amp_var: float
    cross: float
    amp_mean: float
    L: int


def constants_gaussian(m: int, kappa: float) -> NoiseFigures:
    """Theory figures for Gaussian noise, by quadrature.

    ``A1`` and ``B1`` are exactly ``1/(2*kappa)`` (the unwrapped second
    moments reduce to single Gaussian components); the wrapped figures
    and ``h2(0)`` are integrated numerically.

    Raises
    ------
    TheoryRangeError
        For ``kappa <= 0.01``, where the predictions stop being
        meaningful.
    QuadratureError
        If the adaptive rules cannot reach the requested tolerance.
    """
    kappa = _check_kappa(kappa)
    if kappa <= KAPPA_FLOOR:
        raise TheoryRangeError(
            f"kappa={kappa:g} is at or below the supported floor {KAPPA_FLOOR:g}"
        )
    if m < 2:
        raise ValueError("M must be >= 2")
    pts = _wrap_kinks(m) + _peak_points(kappa)
    h1_0 = _piecewise_quad(lambda p: np.cos(p) * gaussian_g(p, kappa), pts)
    h2_0 = _piecewise_quad(
        lambda p: np.cos(wrap_frac(p, m)) * gaussian_g(p, kappa), pts
    )
    a2 = _gaussian_second_moment(m, kappa, lambda w: np.sin(w) ** 2)
    b2 = _gaussian_second_moment(m, kappa, lambda w: np.cos(w) ** 2) - h2_0**2
    psis = (2.0 * np.arange(m) + 1.0) * np.pi / m
    g_boundary = tuple(float(gaussian_g(psi, kappa)) for psi in psis)
    h_const = h2_0 - 2.0 * np.sin(np.pi / m) * sum(g_boundary)
    inv2k = 1.0 / (2.0 * kappa)
    return NoiseFigures(
        M=m,
        kappa=kappa,
        h1_0=h1_0,
        h2_0=h2_0,
        H=h_const,
        A1=inv2k,
        A2=a2,
        B1=inv2k,
        B2=b2,
        g_boundary=g_boundary,
    )


def constants_mc(
    noise: NoiseModel,
    m: int,
    rho0: float = 1.0,
    samples: int = 4_000_000,
    seed: int = 0,
) -> NoiseFigures:
    """Theory figures for an arbitrary circularly symmetric noise model.

    Draws ``samples`` normalised observations ``1 + w/rho0`` and forms
    sample moments; the boundary density values entering ``H`` use a
    binned estimator of halfwidth ``delta = min(0.01, pi/(8*M))`` whose
    O(delta^2) bias is bounded from the binned second difference.

    Sampling is chunked with counter-keyed streams, so the result is a
    pure function of ``(seed, samples)`` independent of any execution
    interleaving.
    """
    if m < 2:
        raise ValueError("M must be >= 2")
    if samples < 10_000:
        raise ValueError("at least 10_000 samples are required")
    if not np.isfinite(rho0) or rho0 <= 0:
        raise ValueError("rho0 must be a positive finite real")
    delta = min(0.01, np.pi / (8 * m))
    psis = (2.0 * np.arange(m) + 1.0) * np.pi / m
    sin_m = 2.0 * np.sin(np.pi / m)
    names = (
        "u1", "v", "a1", "a2", "b1", "b2", "s",
        "vsq", "a1sq", "a2sq", "b1sq", "b2sq", "ssq", "v_b2", "v_s",
    )
    parts: dict[str, list[float]] = {k: [] for k in names}
    bin_parts = {k: [np.zeros(m)] for k in ("g0", "gm", "gp")}
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    n_chunks = (samples + MC_CHUNK - 1) // MC_CHUNK
    for chunk in range(n_chunks):
        n = min(MC_CHUNK, samples - chunk * MC_CHUNK)
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, chunk], dtype=np.uint64))
        )
        w = noise.sample(n, rng)
        c = 1.0 + w / rho0
        big_r = np.abs(c)
        phi = np.angle(c)
        wrapped = wrap_frac(phi, m)
        u1 = c.real
        a1 = c.imag**2
        v = big_r * np.cos(wrapped)
        a2 = (big_r * np.sin(wrapped)) ** 2
        b1 = u1**2
        b2 = v**2
        s_vec = np.zeros(n)
        g0 = np.empty(m)
        gm = np.empty(m)
        gp = np.empty(m)
        for k, psi in enumerate(psis):
            dist = wrap_pi(phi - psi)
            sel = np.abs(dist) < delta
            g0[k] = np.sum(big_r[sel])
            gm[k] = np.sum(big_r[np.abs(dist + 2 * delta) < delta])
            gp[k] = np.sum(big_r[np.abs(dist - 2 * delta) < delta])
            s_vec += big_r * sel
        for name, arr in (
            ("u1", u1), ("v", v), ("a1", a1), ("a2", a2), ("b1", b1),
            ("b2", b2), ("s", s_vec), ("vsq", v * v), ("a1sq", a1 * a1),
            ("a2sq", a2 * a2), ("b1sq", b1 * b1), ("b2sq", b2 * b2),
            ("ssq", s_vec * s_vec), ("v_b2", v * b2), ("v_s", v * s_vec),
        ):
            parts[name].append(float(np.sum(arr)))
        bin_parts["g0"].append(g0)
        bin_parts["gm"].append(gm)
        bin_parts["gp"].append(gp)

    n = float(samples)
    mean = {k: math.fsum(parts[k]) / n for k in names}

    def var_of(name, sq_name):
        return max(mean[sq_name] - mean[name] ** 2, 0.0)

    se = {
        "h2_0": np.sqrt(var_of("v", "vsq") / n),
        "A1": np.sqrt(var_of("a1", "a1sq") / n),
        "A2": np.sqrt(var_of("a2", "a2sq") / n),
        "B1": np.sqrt(var_of("b1", "b1sq") / n),
    }
    cov_v_b2 = mean["v_b2"] - mean["v"] * mean["b2"]
    var_b2_fig = (
        var_of("b2", "b2sq")
        + 4.0 * mean["v"] ** 2 * var_of("v", "vsq")
        - 4.0 * mean["v"] * cov_v_b2
    )
    se["B2"] = np.sqrt(max(var_b2_fig, 0.0) / n)
    scale = sin_m / (2.0 * delta)
    cov_v_s = mean["v_s"] - mean["v"] * mean["s"]
    var_h = (
        var_of("v", "vsq")
        + scale**2 * var_of("s", "ssq")
        - 2.0 * scale * cov_v_s
    )
    se["H"] = np.sqrt(max(var_h, 0.0) / n)

    g0 = sum(bin_parts["g0"]) / (n * 2.0 * delta)
    gm = sum(bin_parts["gm"]) / (n * 2.0 * delta)
    gp = sum(bin_parts["gp"]) / (n * 2.0 * delta)
    second_diff = (gp - 2.0 * g0 + gm) / (2.0 * delta) ** 2
    h_bias = sin_m * float(np.sum(np.abs(second_diff))) * delta**2 / 6.0

    h2_0 = mean["v"]
    h_const = h2_0 - sin_m * float(np.sum(g0))
    figures = dict(
        h1_0=mean["u1"],
        h2_0=h2_0,
        H=h_const,
        A1=mean["a1"],
        A2=mean["a2"],
        B1=mean["b1"] - 1.0,
        B2=mean["b2"] - h2_0**2,
    )
    finite = all(np.isfinite(x) for x in (*figures.values(), *se.values()))
    reliable = finite and all(
        se[k] <= 0.5 * max(abs(figures[k]), 1e-12) or se[k] < 1e-6
        for k in ("h2_0", "A1", "A2", "B1")
    )
    errors = FigureErrors(
        h2_0=se["h2_0"],
        A1=se["A1"],
        A2=se["A2"],
        B1=se["B1"],
        B2=se["B2"],
        H=se["H"],
        bin_halfwidth=delta,
        h_bias_bound=h_bias,
        reliable=bool(reliable),
    )
    kappa_eq = rho0**2 / noise.mean_square if noise.mean_square > 0 else np.inf
    return NoiseFigures(
        M=m,
        kappa=float(kappa_eq),
        g_boundary=tuple(float(x) for x in g0),
        errors=errors,
        **figures,
    )


def predict(figures: NoiseFigures, inp: TheoryInput, length: int) -> CovariancePrediction:
    """Finite-length covariance prediction at a pilot/data mixture.

    Divides the limiting covariance by the frame length:

        phase_var = (p*A1 + d*A2) / ((p + H*d)^2 * L)
        amp_var   = rho0^2 * (p*B1 + d*B2) / L

    with zero cross-covariance and amplitude mean ``rho0*(p + d*h2(0))``.

    Raises
    ------
    TheoryRangeError
        If ``p + H*d <= 0`` (theory breakdown at very low SNR).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if inp.M != figures.M:
        raise ValueError("constellation size of figures and input differ")
    denom = inp.p + figures.H * inp.d
    if denom <= 0:
        raise TheoryRangeError(
            f"p + H*d = {denom:g} <= 0; the variance expressions do not apply"
        )
    phase_var = (inp.p * figures.A1 + inp.d * figures.A2) / (denom**2 * length)
    amp_var = inp.rho0**2 * (inp.p * figures.B1 + inp.d * figures.B2) / length
    amp_mean = inp.rho0 * (inp.p + inp.d * figures.h2_0)
    return CovariancePrediction(
        phase_var=float(phase_var),
        amp_var=float(amp_var),
        cross=0.0,
        amp_mean=float(amp_mean),
        L=int(length),
    )
