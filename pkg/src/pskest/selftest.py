"""Built-in reduced-scale verification suites.

Each suite re-derives a handful of results through an independent route
(exhaustive search, quadrature identities, bitwise reproduction) and
raises ``AssertionError`` on the first mismatch.  The CLI front end
reports one PASS/FAIL line per suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import angles, estimators, model, simulate, theory

__all__ = ["SUITES", "SuiteResult", "run_suites"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


def _suite_angles() -> None:
    rng = np.random.default_rng(2024)
    x = rng.uniform(-100, 100, 100_000)
    w = angles.wrap_pi(x)
    assert np.all((w >= -np.pi) & (w < np.pi)), "wrap_pi range violated"
    turns = (x - w) / (2 * np.pi)
    assert np.max(np.abs(turns - np.round(turns))) < 1e-9, "wrap_pi congruence violated"
    assert np.array_equal(angles.wrap_pi(w), w), "wrap_pi not idempotent"
    for m in (2, 4, 8):
        r = angles.wrap_frac(x, m)
        g = angles.round_to_grid(x, m)
        assert np.max(np.abs(g + r - x)) < 1e-12 * np.maximum(np.abs(x), 1).max(), (
            "grid split identity violated"
        )
    assert angles.wrap_pi(np.pi) == -np.pi, "half-integer tie must round up"


def _random_instance(rng):
    m = int(rng.choice([2, 4, 8]))
    n_data = int(rng.integers(1, 7))
    n_pilot = int(rng.integers(0, 5))
    length = n_data + n_pilot
    positions = rng.permutation(length)
    points = model.psk_points(m)
    plan = model.FramePlan(
        length=length,
        pilot_positions=np.sort(positions[:n_pilot]),
        data_positions=np.sort(positions[n_pilot:]),
        pilot_symbols=points[rng.integers(0, m, n_pilot)],
    )
    snr_db = float(rng.choice([-5.0, 5.0, 15.0]))
    noise = model.GaussianNoise.for_snr(snr_db)
    params = model.ChannelParams(rho0=1.0, theta0=float(rng.uniform(-np.pi, np.pi)))
    symbols = model.random_frame(plan, m, rng)
    return model.apply_channel(plan, symbols, params, noise, rng), m


def _suite_oracle() -> None:
    rng = np.random.default_rng(99)
    for _ in range(60):
        frame, m = _random_instance(rng)
        fast = estimators.mackenthun(frame, m)
        slow = estimators.naive_enumeration(frame, m)
        exact = estimators.brute_force(frame, m)
        assert abs(fast.objective - exact.objective) < 1e-9, "objective mismatch"
        assert abs(slow.objective - exact.objective) < 1e-9, "objective mismatch"
        a_fast, a_exact = fast.amplitude.gain, exact.amplitude.gain
        if frame.plan.pilot_count:
            dev = abs(a_fast - a_exact)
        else:
            rot = np.exp(2j * np.pi * np.arange(m) / m)
            dev = np.min(np.abs(a_fast - a_exact * rot))
        assert dev < 1e-7, "gain mismatch against exhaustive search"


def _suite_recovery() -> None:
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = int(rng.choice([2, 4, 8]))
        plan = model.FramePlan.with_prefix_pilots(16, int(rng.integers(1, 5)))
        symbols = model.random_frame(plan, m, rng)
        params = model.ChannelParams(
            rho0=float(rng.uniform(0.1, 5.0)),
            theta0=float(rng.uniform(-np.pi, np.pi)),
        )
        frame = model.apply_channel(plan, symbols, params, model.ZeroNoise(), rng)
        report = estimators.mackenthun(frame, m)
        assert abs(report.amplitude.gain - params.gain) < 1e-12, (
            "zero-noise recovery must be exact"
        )


def _suite_constants() -> None:
    for kappa in (0.5, 2.0):
        one = theory.gaussian_h1(0.0, kappa)
        assert abs(one - 1.0) < 1e-6, "E R cos(Phi) must equal 1"
    figs = theory.constants_gaussian(4, 2.0)
    assert abs(figs.A1 - 0.25) < 1e-12 and abs(figs.B1 - 0.25) < 1e-12
    high = theory.constants_gaussian(4, 1e4)
    assert abs(high.h2_0 - 1.0) <= 1e-3, "h2(0) must approach 1 at high SNR"
    assert 1 - 1e-2 <= high.H <= 1 + 1e-9, "H must approach 1 at high SNR"


def _suite_simulation() -> None:
    config = simulate.SweepConfig(
        M=4, L=64, pilot_count=8, snr_grid_db=(10.0,), trials=40, master_seed=5
    )
    first = simulate.run_sweep(config)
    again = simulate.run_sweep(config)
    threaded = simulate.run_sweep(
        simulate.SweepConfig(
            M=4, L=64, pilot_count=8, snr_grid_db=(10.0,), trials=40,
            master_seed=5, threads=3,
        )
    )
    assert first.rows == again.rows, "rerun must reproduce bitwise"
    assert first.rows == threaded.rows, "thread count must not change results"
    clean = simulate.run_sweep(
        simulate.SweepConfig(
            M=4, L=32, pilot_count=4, snr_grid_db=(0.0,), trials=1,
            noise="none", master_seed=1,
        )
    )
    assert clean.rows[0].mse_phase_sim == 0.0, "zero noise must give zero phase MSE"
    assert clean.rows[0].var_amp_sim == 0.0, "zero noise must give zero amp variance"


SUITES = {
    "angles": _suite_angles,
    "oracle": _suite_oracle,
    "recovery": _suite_recovery,
    "constants": _suite_constants,
    "simulation": _suite_simulation,
}


def run_suites(names=None) -> list[SuiteResult]:
    """Run the named suites (all by default) and collect results."""
    if names is None:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    results = []
    for name in names:
        start = time.perf_counter()
        try:
            SUITES[name]()
            results.append(SuiteResult(name, True, time.perf_counter() - start))
        except AssertionError as exc:
            results.append(
                SuiteResult(name, False, time.perf_counter() - start, str(exc))
            )
    return results
