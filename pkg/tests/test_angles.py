"""Wrapping and grid-rounding primitives."""

import numpy as np
import pytest

from pskest import grid_index, round_half_up, round_to_grid, wrap_frac, wrap_pi

TWO_PI = 2 * np.pi


def _nearest_grid_oracle(x, m):
    """Brute-force search over grid indices with the round-up tie rule."""
    period = TWO_PI / m
    ks = np.arange(int(np.floor(x / period)) - 2, int(np.ceil(x / period)) + 3)
    dist = np.abs(x - period * ks)
    best = dist.min()
    # ties resolve to the larger index (rounding toward +inf)
    return int(ks[np.nonzero(dist <= best + 1e-15)[0][-1]])


class TestRoundHalfUp:
    @pytest.mark.parametrize(
        "x,expected",
        [(0.0, 0.0), (0.5, 1.0), (-0.5, 0.0), (1.5, 2.0), (-1.5, -1.0), (2.4, 2.0)],
    )
    def test_ties_round_up(self, x, expected):
        assert round_half_up(x) == expected

    def test_near_half_integer_is_not_inflated(self):
        """floor(x + 0.5) would misround the double just below 0.5."""
        below_half = np.nextafter(0.5, 0.0)
        assert round_half_up(below_half) == 0.0
        assert round_half_up(-below_half) == 0.0


class TestWrapPi:
    def test_zero(self):
        assert wrap_pi(0.0) == 0.0

    def test_phase_difference_wraps_the_short_way(self):
        assert wrap_pi(-0.99 * np.pi - 0.99 * np.pi) == pytest.approx(
            0.02 * np.pi, abs=1e-12
        )

    def test_boundary_tie_rounds_up(self):
        assert wrap_pi(np.pi) == -np.pi

    def test_range_and_congruence_bulk(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-100, 100, 1_000_000)
        w = wrap_pi(x)
        assert np.all(w >= -np.pi) and np.all(w < np.pi)
        turns = (x - w) / TWO_PI
        assert np.max(np.abs(turns - np.round(turns))) < 1e-9

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1000, 1000, 100_000)
        w = wrap_pi(x)
        assert np.array_equal(wrap_pi(w), w)
        edge = np.array([-np.pi, 0.0, np.nextafter(np.pi, 0.0)])
        assert np.array_equal(wrap_pi(edge), edge)

    def test_nonfinite_rejected(self):
        for bad in (np.nan, np.inf, -np.inf):
            with pytest.raises(ValueError):
                wrap_pi(bad)


class TestWrapFrac:
    @pytest.mark.parametrize(
        "x,m,expected",
        [
            (0.0, 4, 0.0),
            (np.pi / 4, 4, -np.pi / 4),
            (2 * np.pi / 3, 2, -np.pi / 3),
        ],
    )
    def test_reference_values(self, x, m, expected):
        assert wrap_frac(x, m) == pytest.approx(expected, abs=1e-13)

    @pytest.mark.parametrize("m", [2, 3, 4, 8])
    def test_matches_nearest_grid_oracle(self, m):
        rng = np.random.default_rng(m)
        xs = np.concatenate(
            [
                rng.uniform(-20, 20, 5_000),
                np.arange(-8, 9) * np.pi / m,  # boundary neighbourhood
            ]
        )
        period = TWO_PI / m
        for x in xs:
            x = float(x)
            k = grid_index(x, m)
            # chosen grid point must be a nearest one (up to representation
            # error of the boundary itself)
            best = abs(x - period * _nearest_grid_oracle(x, m))
            assert abs(x - period * k) <= best + 4e-15
            assert wrap_frac(x, m) == pytest.approx(x - period * k, abs=1e-12)

    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_exact_ties_round_up(self, m):
        # pi/m is exact for power-of-two m, so these are true fp ties
        period = TWO_PI / m
        for j in (-3, -1, 0, 1, 2):
            boundary = np.pi / m + j * period
            k = grid_index(boundary, m)
            assert k == j + 1, "tie must resolve to the upper grid point"

    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_range(self, m):
        rng = np.random.default_rng(10 + m)
        r = wrap_frac(rng.uniform(-50, 50, 200_000), m)
        half = np.pi / m
        assert np.all(r >= -half - 1e-15) and np.all(r < half + 1e-15)

    @pytest.mark.parametrize("m", [2, 5, 8])
    def test_periodicity(self, m):
        rng = np.random.default_rng(20 + m)
        x = rng.uniform(-5, 5, 2_000)
        for k in (-100, -7, 1, 13, 100):
            shifted = wrap_frac(x + TWO_PI * k / m, m)
            assert np.max(np.abs(shifted - wrap_frac(x, m))) < 1e-9

    def test_bad_m_rejected(self):
        for bad in (1, 0, -3, 2.0, "4"):
            with pytest.raises(ValueError):
                wrap_frac(0.3, bad)


class TestRoundToGrid:
    @pytest.mark.parametrize(
        "x,m,expected",
        [
            (0.0, 8, 0.0),
            (np.pi / 4, 4, np.pi / 2),
            (-0.1, 2, 0.0),
        ],
    )
    def test_reference_values(self, x, m, expected):
        assert round_to_grid(x, m) == pytest.approx(expected, abs=1e-13)

    @pytest.mark.parametrize("m", [2, 3, 4, 7, 8])
    def test_split_identity(self, m):
        rng = np.random.default_rng(30 + m)
        x = rng.uniform(-10, 10, 200_000)
        recon = round_to_grid(x, m) + wrap_frac(x, m)
        assert np.max(np.abs(recon - x) / np.maximum(np.abs(x), 1e-3)) < 1e-12

    def test_result_is_on_grid(self):
        rng = np.random.default_rng(40)
        x = rng.uniform(-30, 30, 10_000)
        g = round_to_grid(x, 4)
        steps = g / (TWO_PI / 4)
        assert np.max(np.abs(steps - np.round(steps))) < 1e-9
