"""Signal model: PSK constellations, frame layout, channel and noise.

The transmitted frame is a length-``L`` sequence of unit-modulus symbols,
some at pilot positions (known to the receiver) and the rest at data
positions (unknown).  The channel multiplies by a complex gain
``rho0 * exp(1j*theta0)`` and adds i.i.d. circularly symmetric noise.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap_frac, wrap_pi

__all__ = [
    "Constellation",
    "psk_points",
    "FramePlan",
    "ChannelParams",
    "ReceivedFrame",
    "NoiseModel",
    "GaussianNoise",
    "RingNoise",
    "ZeroNoise",
    "random_frame",
    "apply_channel",
    "snr_to_sigma",
    "snr_to_kappa",
]

PILOT_TOL = 1e-12


def psk_points(m: int) -> np.ndarray:
    """Constellation points ``exp(2j*pi*k/m)`` for ``k = 0..m-1``."""
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 2:
        raise ValueError(f"constellation size must be an integer >= 2, got {m!r}")
    return np.exp(2j * np.pi * np.arange(m) / m)


@dataclass(frozen=True)
class Constellation:
    """M-ary PSK alphabet with symbols evenly spaced on the unit circle."""

    M: int

    def __post_init__(self):
        psk_points(self.M)  # validates M

    @property
    def points(self) -> np.ndarray:
        return psk_points(self.M)


@dataclass(frozen=True)
class FramePlan:
    """Transmission layout: which indices carry pilots and their values.

    Attributes
    ----------
    length : int
        Total number of symbols ``L``.
    pilot_positions : ndarray of int
        Sorted indices of the pilot symbols.
    data_positions : ndarray of int
        Sorted indices of the data symbols.  Together with the pilot
        positions these partition ``0..L-1``.
    pilot_symbols : ndarray of complex
        Known pilot values, aligned with ``pilot_positions``; each must
        have unit modulus.
    """

    length: int
    pilot_positions: np.ndarray
    data_positions: np.ndarray
    pilot_symbols: np.ndarray

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("frame length must be >= 1")
        pilots = np.asarray(self.pilot_positions, dtype=np.intp)
        data = np.asarray(self.data_positions, dtype=np.intp)
        psym = np.asarray(self.pilot_symbols, dtype=complex)
        pilots = np.sort(pilots)
        data = np.sort(data)
        joint = np.concatenate([pilots, data])
        if len(np.unique(joint)) != len(joint):
            raise ValueError("pilot and data positions must be disjoint")
        if len(joint) != self.length or not np.array_equal(
            np.sort(joint), np.arange(self.length)
        ):
            raise ValueError("pilot and data positions must partition 0..L-1")
        if len(psym) != len(pilots):
            raise ValueError("one pilot symbol required per pilot position")
        if len(psym) and np.max(np.abs(np.abs(psym) - 1.0)) > PILOT_TOL:
            raise ValueError("pilot symbols must have unit modulus")
        for name, arr in (
            ("pilot_positions", pilots),
            ("data_positions", data),
            ("pilot_symbols", psym),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def with_prefix_pilots(
        cls, length: int, pilot_count: int, pilot_symbols=None
    ) -> "FramePlan":
        """Plan with pilots occupying the first ``pilot_count`` indices.

        Pilot values default to all ones (constellation point 0), which
        lies on every PSK grid.
        """
        if not 0 <= pilot_count <= length:
            raise ValueError("pilot_count must lie in [0, length]")
        if pilot_symbols is None:
            pilot_symbols = np.ones(pilot_count, dtype=complex)
        return cls(
            length=length,
            pilot_positions=np.arange(pilot_count),
            data_positions=np.arange(pilot_count, length),
            pilot_symbols=pilot_symbols,
        )

    @classmethod
    def from_positions(
        cls, length: int, pilot_positions, pilot_symbols=None
    ) -> "FramePlan":
        """Plan with pilots at explicit positions (default all-ones values)."""
        pilot_positions = np.asarray(pilot_positions, dtype=np.intp)
        mask = np.ones(length, dtype=bool)
        mask[pilot_positions] = False
        if pilot_symbols is None:
            pilot_symbols = np.ones(len(pilot_positions), dtype=complex)
        return cls(
            length=length,
            pilot_positions=np.sort(pilot_positions),
            data_positions=np.nonzero(mask)[0],
            pilot_symbols=pilot_symbols,
        )

    @property
    def pilot_count(self) -> int:
        return len(self.pilot_positions)

    @property
    def data_count(self) -> int:
        return len(self.data_positions)

    def check_pilot_grid(self, m: int, tol: float = 1e-9) -> None:
        """Raise if any pilot phase is off the 2*pi/m grid."""
        if self.pilot_count == 0:
            return
        off = wrap_frac(np.angle(self.pilot_symbols), m)
        if np.max(np.abs(off)) > tol:
            raise ValueError(f"pilot symbols are not on the 2*pi/{m} phase grid")


@dataclass(frozen=True)
class ChannelParams:
    """Complex channel gain in polar form: ``rho0 * exp(1j*theta0)``."""

    rho0: float
    theta0: float

    def __post_init__(self):
        if not np.isfinite(self.rho0) or self.rho0 <= 0:
            raise ValueError("rho0 must be a positive finite real")
        object.__setattr__(self, "theta0", wrap_pi(float(self.theta0)))

    @property
    def gain(self) -> complex:
        return self.rho0 * np.exp(1j * self.theta0)


@dataclass(frozen=True)
class ReceivedFrame:
    """Received complex samples aligned with a :class:`FramePlan`."""

    samples: np.ndarray
    plan: FramePlan

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if len(samples) != self.plan.length:
            raise ValueError("sample count must equal the plan length")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def pilot_samples(self) -> np.ndarray:
        return self.samples[self.plan.pilot_positions]

    @property
    def data_samples(self) -> np.ndarray:
        return self.samples[self.plan.data_positions]


class NoiseModel(abc.ABC):
    """Circularly symmetric complex noise source.

    Implementations draw i.i.d. samples whose phase is uniform on
    ``[0, 2*pi)`` and independent of the magnitude, with finite
    ``E|w|^2`` reported by :attr:`mean_square`.
    """

    @abc.abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` i.i.d. complex noise samples."""

    @property
    @abc.abstractmethod
    def mean_square(self) -> float:
        """Second moment ``E|w|^2``."""


@dataclass(frozen=True)
class GaussianNoise(NoiseModel):
    """Complex Gaussian noise with independent N(0, sigma^2) components."""

    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError("sigma must be a positive finite real")

    def sample(self, n, rng):
        return self.sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    @property
    def mean_square(self):
        return 2.0 * self.sigma**2

    @classmethod
    def for_snr(cls, snr_db: float, rho0: float = 1.0) -> "GaussianNoise":
        return cls(sigma=snr_to_sigma(snr_db, rho0))


@dataclass(frozen=True)
class RingNoise(NoiseModel):
    """Fixed-magnitude noise ``radius * exp(1j*Theta)``, Theta uniform.

    A non-Gaussian circularly symmetric model; useful for exercising
    results that hold beyond the Gaussian case.
    """

    radius: float

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError("radius must be a positive finite real")

    def sample(self, n, rng):
        return self.radius * np.exp(2j * np.pi * rng.random(n))

    @property
    def mean_square(self):
        return self.radius**2

    @classmethod
    def for_snr(cls, snr_db: float, rho0: float = 1.0) -> "RingNoise":
        # matches the Gaussian convention snr = rho0^2 / E|w|^2
        return cls(radius=rho0 / np.sqrt(snr_to_kappa(snr_db)))


@dataclass(frozen=True)
class ZeroNoise(NoiseModel):
    """Degenerate noiseless model, intended for exactness tests."""

    def sample(self, n, rng):
        return np.zeros(n, dtype=complex)

    @property
    def mean_square(self):
        return 0.0


def random_frame(plan: FramePlan, m: int, rng: np.random.Generator) -> np.ndarray:
    """Transmitted symbol sequence: fixed pilots, uniform random data.

    Data symbols are drawn independently and uniformly from the M-PSK
    alphabet; pilot positions carry exactly ``plan.pilot_symbols``.
    """
    points = psk_points(m)
    plan.check_pilot_grid(m)
    symbols = np.empty(plan.length, dtype=complex)
    symbols[plan.pilot_positions] = plan.pilot_symbols
    if plan.data_count:
        symbols[plan.data_positions] = points[rng.integers(0, m, plan.data_count)]
    return symbols


def apply_channel(
    plan: FramePlan,
    symbols: np.ndarray,
    params: ChannelParams,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> ReceivedFrame:
    """Apply the complex gain and additive noise: ``y = gain*s + w``."""
    symbols = np.asarray(symbols, dtype=complex)
    if len(symbols) != plan.length:
        raise ValueError("symbol count must equal the plan length")
    samples = params.gain * symbols + noise.sample(plan.length, rng)
    return ReceivedFrame(samples=samples, plan=plan)


def snr_to_sigma(snr_db: float, rho0: float = 1.0) -> float:
    """Per-component noise deviation for a given SNR ``rho0^2/(2*sigma^2)``."""
    if not np.isfinite(rho0) or rho0 <= 0:
        raise ValueError("rho0 must be a positive finite real")
    return rho0 / np.sqrt(2.0 * snr_to_kappa(snr_db))


def snr_to_kappa(snr_db: float) -> float:
    """Linear SNR ratio ``kappa = rho0^2/(2*sigma^2)`` from decibels."""
    return float(10.0 ** (np.asarray(snr_db, dtype=float) / 10.0))
