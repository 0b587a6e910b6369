"""Reproducible Monte-Carlo sweeps of estimator error versus SNR.

Each (SNR point, trial) pair owns a counter-keyed random stream derived
from the master seed, so results are bitwise reproducible and invariant
to the number of worker threads.  Aggregates use exactly-rounded
summation, which is ordering-independent by construction.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap_frac, wrap_pi
from .estimators import mackenthun, pilot_only, viterbi_viterbi
from .model import (
    ChannelParams,
    FramePlan,
    GaussianNoise,
    NoiseModel,
    RingNoise,
    ZeroNoise,
    apply_channel,
    random_frame,
    snr_to_kappa,
)
from . import theory as _theory

__all__ = [
    "ESTIMATORS",
    "NOISE_MODELS",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "phase_error",
    "amp_error",
    "make_noise",
    "run_sweep",
]

ESTIMATORS = ("mackenthun", "pilot_only", "viterbi_viterbi", "weighted")
NOISE_MODELS = ("gaussian", "ring", "none")

_U64 = 0xFFFFFFFFFFFFFFFF


def phase_error(theta_hat: float, theta0: float, coherent: bool, m: int) -> float:
    """Wrapped phase error with the convention matching the pilot layout.

    Coherent runs (pilots present) wrap the difference into ``[-pi, pi)``;
    noncoherent runs wrap modulo ``2*pi/m``, since without pilots the
    phase is identifiable only up to a constellation rotation.
    """
    diff = theta_hat - theta0
    return wrap_pi(diff) if coherent else wrap_frac(diff, m)


def amp_error(rho_hat: float, rho0: float, g0: float) -> float:
    """Centred amplitude error ``rho_hat - rho0*G(0)``.

    The amplitude estimate converges to ``rho0*G(0)``, not ``rho0``, so
    its fluctuation is measured about that limit.
    """
    if rho_hat < 0:
        raise ValueError("rho_hat must be nonnegative")
    return rho_hat - rho0 * g0


@dataclass(frozen=True)
class SweepConfig:
    """Full description of one Monte-Carlo sweep."""

    M: int
    L: int
    pilot_count: int
    snr_grid_db: tuple[float, ...]
    trials: int
    rho0: float = 1.0
    master_seed: int = 0
    estimator: str = "mackenthun"
    beta: float = 1.0
    noise: str = "gaussian"
    pilot_positions: tuple[int, ...] | None = None
    pilot_symbols: tuple[complex, ...] | None = None
    theory: str = "auto"
    theory_mc_samples: int = 4_000_000
    threads: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not 0 <= self.pilot_count <= self.L:
            raise ValueError("pilot_count must lie in [0, L]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.trials >= 2**32 or len(tuple(self.snr_grid_db)) >= 2**32:
            raise ValueError("trial and grid counts must fit in 32 bits")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr grid must be nonempty")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.beta <= 0 or not np.isfinite(self.beta):
            raise ValueError("beta must be a positive finite real")
        if self.estimator == "pilot_only" and self.pilot_count == 0:
            raise ValueError("pilot_only requires at least one pilot")
        if self.theory not in ("auto", "none"):
            raise ValueError("theory must be 'auto' or 'none'")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.pilot_positions is not None:
            object.__setattr__(
                self, "pilot_positions", tuple(int(i) for i in self.pilot_positions)
            )
        if self.pilot_symbols is not None:
            object.__setattr__(
                self, "pilot_symbols", tuple(complex(z) for z in self.pilot_symbols)
            )

    def make_plan(self) -> FramePlan:
        symbols = None if self.pilot_symbols is None else np.asarray(self.pilot_symbols)
        if self.pilot_positions is None:
            return FramePlan.with_prefix_pilots(self.L, self.pilot_count, symbols)
        if len(self.pilot_positions) != self.pilot_count:
            raise ValueError("pilot_positions must match pilot_count")
        return FramePlan.from_positions(self.L, self.pilot_positions, symbols)


@dataclass(frozen=True)
class SweepRow:
    """Aggregated simulation and theory figures at one SNR point."""

    snr_db: float
    kappa: float
    mse_phase_sim: float
    se_phase: float
    var_amp_sim: float
    se_amp: float
    amp_mean_sim: float
    se_amp_mean: float
    cross_cov_sim: float
    se_cross: float
    mse_phase_theory: float
    var_amp_theory: float
    amp_mean_theory: float
    theory_status: str


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: tuple[SweepRow, ...]

    def row_for(self, snr_db: float) -> SweepRow:
        for row in self.rows:
            if row.snr_db == snr_db:
                return row
        raise KeyError(f"no row at {snr_db} dB")


def make_noise(name: str, snr_db: float, rho0: float) -> NoiseModel:
    """Noise model at a given SNR, using ``snr = rho0^2 / E|w|^2``."""
    if name == "gaussian":
        return GaussianNoise.for_snr(snr_db, rho0)
    if name == "ring":
        return RingNoise.for_snr(snr_db, rho0)
    if name == "none":
        return ZeroNoise()
    raise ValueError(f"unknown noise model {name!r}")


def _mc_theory_seed(master_seed: int, snr_index: int) -> int:
    return (int(master_seed) * 0x9E3779B97F4A7C15 + 0x100000001 * snr_index + 1) & _U64


def _resolve_figures(config: SweepConfig, snr_index: int, snr_db: float):
    """Theory figures for one SNR point, or (None, status) when unavailable."""
    theory_capable = config.estimator in ("mackenthun", "pilot_only") or (
        config.estimator == "weighted" and config.beta == 1.0
    )
    if config.theory == "none" or config.noise == "none":
        return None, "none"
    if not theory_capable:
        return None, "no_theory"
    kappa = snr_to_kappa(snr_db)
    if config.noise == "gaussian":
        try:
            return _theory.constants_gaussian(config.M, kappa), "ok"
        except _theory.TheoryRangeError:
            return None, "out_of_range"
    noise = make_noise(config.noise, snr_db, config.rho0)
    figures = _theory.constants_mc(
        noise,
        config.M,
        rho0=config.rho0,
        samples=config.theory_mc_samples,
        seed=_mc_theory_seed(config.master_seed, snr_index),
    )
    return figures, "ok"


def _trial_stream(master_seed: int, snr_index: int, trial: int) -> np.random.Generator:
    key = np.array(
        [((snr_index << 32) | trial) & _U64, int(master_seed) & _U64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _fsum_mean(values: np.ndarray) -> float:
    return math.fsum(values) / len(values)


def _se_of_mean(values: np.ndarray, mean: float) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return math.sqrt(var / n)


def run_sweep(config: SweepConfig) -> SweepResult:
    """Run the configured trials at every SNR point and aggregate.

    Per trial the carrier phase is redrawn uniformly on ``[-pi, pi)``,
    fresh data symbols and noise are generated, and the configured
    estimator is applied.  Phase errors follow the coherent convention
    when pilots are present (except for the inherently noncoherent
    Viterbi&Viterbi estimator); amplitude errors are centred on
    ``rho0 * G(0)`` from the theory backend.

    Returns one :class:`SweepRow` per SNR point with simulated moments,
    their standard errors, and the covariance predictions where the
    theory applies.
    """
    plan = config.make_plan()
    m = config.M
    rho0 = config.rho0
    estimator = config.estimator
    if estimator == "viterbi_viterbi" and config.pilot_count > 0:
        warnings.warn(
            "the Viterbi&Viterbi estimator ignores pilot symbols; "
            "they are treated as unknown data",
            stacklevel=2,
        )
    coherent = config.pilot_count > 0 and estimator != "viterbi_viterbi"
    beta = config.beta if estimator == "weighted" else 1.0

    def run_one(snr_index: int, trial: int, noise: NoiseModel):
        rng = _trial_stream(config.master_seed, snr_index, trial)
        theta0 = float(rng.uniform(-np.pi, np.pi))
        symbols = random_frame(plan, m, rng)
        frame = apply_channel(
            plan, symbols, ChannelParams(rho0=rho0, theta0=theta0), noise, rng
        )
        if estimator in ("mackenthun", "weighted"):
            report = mackenthun(frame, m, beta)
            theta_hat, rho_hat = report.amplitude.theta, report.amplitude.rho
        elif estimator == "pilot_only":
            amp = pilot_only(frame)
            theta_hat, rho_hat = amp.theta, amp.rho
        else:
            theta_hat, rho_hat = viterbi_viterbi(frame, m), np.nan
        return phase_error(theta_hat, theta0, coherent, m), rho_hat

    rows = []
    for snr_index, snr_db in enumerate(config.snr_grid_db):
        noise = make_noise(config.noise, snr_db, rho0)
        kappa = snr_to_kappa(snr_db)
        figures, status = _resolve_figures(config, snr_index, snr_db)

        n_trials = config.trials
        pe = np.empty(n_trials)
        rho = np.empty(n_trials)

        def fill(span):
            for t in span:
                pe[t], rho[t] = run_one(snr_index, t, noise)

        if config.threads == 1:
            fill(range(n_trials))
        else:
            chunk = (n_trials + config.threads - 1) // config.threads
            spans = [
                range(lo, min(lo + chunk, n_trials))
                for lo in range(0, n_trials, chunk)
            ]
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                list(pool.map(fill, spans))

        pe2 = pe**2
        mse_phase = _fsum_mean(pe2)
        se_phase = _se_of_mean(pe2, mse_phase)

        # effective mixture the theory sees (pilot_only discards the data)
        if estimator == "pilot_only":
            p_eff, d_eff, len_eff = 1.0, 0.0, config.pilot_count
        else:
            p_eff = config.pilot_count / config.L
            d_eff = 1.0 - p_eff
            len_eff = config.L

        if config.noise == "none":
            g0 = 1.0
        elif figures is not None:
            g0 = figures.g_zero(p_eff, d_eff)
        else:
            g0 = np.nan

        if np.isfinite(g0) and not np.any(np.isnan(rho)):
            ae = rho - rho0 * g0
            ae2 = ae**2
            var_amp = _fsum_mean(ae2)
            se_amp = _se_of_mean(ae2, var_amp)
            amp_mean = _fsum_mean(rho)
            se_amp_mean = _se_of_mean(rho, amp_mean)
            prod = (pe - _fsum_mean(pe)) * (ae - _fsum_mean(ae))
            cross = math.fsum(prod) / max(n_trials - 1, 1)
            se_cross = _se_of_mean(prod, _fsum_mean(prod))
        else:
            var_amp = se_amp = amp_mean = se_amp_mean = np.nan
            cross = se_cross = np.nan

        mse_phase_th = var_amp_th = amp_mean_th = np.nan
        if figures is not None:
            try:
                pred = _theory.predict(
                    figures,
                    _theory.TheoryInput(
                        M=m, p=p_eff, d=d_eff, kappa=kappa, rho0=rho0
                    ),
                    len_eff,
                )
                mse_phase_th = pred.phase_var
                var_amp_th = pred.amp_var
                amp_mean_th = pred.amp_mean
            except _theory.TheoryRangeError:
                status = "out_of_range"

        rows.append(
            SweepRow(
                snr_db=snr_db,
                kappa=kappa,
                mse_phase_sim=mse_phase,
                se_phase=se_phase,
                var_amp_sim=var_amp,
                se_amp=se_amp,
                amp_mean_sim=amp_mean,
                se_amp_mean=se_amp_mean,
                cross_cov_sim=cross,
                se_cross=se_cross,
                mse_phase_theory=mse_phase_th,
                var_amp_theory=var_amp_th,
                amp_mean_theory=amp_mean_th,
                theory_status=status,
            )
        )
    return SweepResult(config=config, rows=tuple(rows))
