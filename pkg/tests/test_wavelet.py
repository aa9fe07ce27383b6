import math

import numpy as np
import pytest

from wavead.ingest import load_csv
from wavead.wavelet import (
    DB1,
    FilterBank,
    coefficient_image,
    dwt_step,
    export_image_csv,
    get_filter_bank,
    inverse_dwt_step,
    max_levels,
    multilevel_dwt,
)

SQRT2 = math.sqrt(2.0)


def oracle_step(signal, lowpass, highpass):
    """Brute-force stride-2 correlation with symmetric extension."""
    x = list(map(float, signal))
    if len(x) % 2:
        x = x + [x[-1]]
    taps = len(lowpass)
    extra = taps - 2
    if extra > 0:
        x = x + x[::-1][:extra]
    n_out = len(signal) // 2 + len(signal) % 2
    approx, detail = [], []
    for n in range(n_out):
        a = sum(lowpass[j] * x[2 * n + j] for j in range(taps))
        d = sum(highpass[j] * x[2 * n + j] for j in range(taps))
        approx.append(a)
        detail.append(d)
    return np.array(approx), np.array(detail)


def oracle_band_lengths(length, levels):
    """Ceil-halving recurrence for the per-band coefficient counts."""
    sizes = []
    current = length
    for _ in range(levels):
        current = (current + 1) // 2
        sizes.append(current)
    return [sizes[-1]] + sizes[::-1]  # A_J then D_J ... D_1


class TestDwtStep:
    def test_reference_vector(self):
        a, d = dwt_step([1.0, 2.0, 3.0, 4.0], DB1)
        oa, od = oracle_step([1, 2, 3, 4], DB1.lowpass, DB1.highpass)
        assert np.allclose(a, oa) and np.allclose(d, od)
        assert np.allclose(a, [3.0 / SQRT2, 7.0 / SQRT2])
        assert np.allclose(a, [2.1213203435596424, 4.949747468305833])
        assert np.allclose(d, [-0.7071067811865475, -0.7071067811865475])

    def test_constant_signal(self):
        c = 2.5
        a, d = dwt_step([c, c, c, c], DB1)
        assert np.allclose(a, [c * SQRT2, c * SQRT2])
        assert np.allclose(d, [0.0, 0.0])

    def test_odd_length_extends_symmetrically(self):
        a, d = dwt_step([1.0, 2.0, 3.0], DB1)
        oa, od = oracle_step([1, 2, 3, 3], DB1.lowpass, DB1.highpass)
        assert a.size == 2 and d.size == 2
        assert np.allclose(a, oa) and np.allclose(d, od)
        assert np.allclose(a, [3.0 / SQRT2, 6.0 / SQRT2])
        assert np.allclose(d, [-1.0 / SQRT2, 0.0])

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            dwt_step([1.0], DB1)

    def test_matches_oracle_on_random_signals(self):
        rng = np.random.default_rng(7)
        for length in range(2, 34):
            x = rng.normal(size=length)
            a, d = dwt_step(x, DB1)
            oa, od = oracle_step(x, DB1.lowpass, DB1.highpass)
            assert np.allclose(a, oa, atol=1e-12)
            assert np.allclose(d, od, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(8)
        x, y = rng.normal(size=12), rng.normal(size=12)
        ax, dx = dwt_step(x, DB1)
        ay, dy = dwt_step(y, DB1)
        a, d = dwt_step(2.0 * x - 3.0 * y, DB1)
        assert np.allclose(a, 2.0 * ax - 3.0 * ay, atol=1e-12)
        assert np.allclose(d, 2.0 * dx - 3.0 * dy, atol=1e-12)

    def test_energy_conservation_even_lengths(self):
        rng = np.random.default_rng(9)
        for length in (2, 8, 10, 24, 64):
            x = rng.normal(size=length)
            a, d = dwt_step(x, DB1)
            assert abs((x**2).sum() - (a**2).sum() - (d**2).sum()) < 1e-9

    def test_impulse_support_single_level(self):
        # only the detail coefficient whose two-sample support covers the
        # impulse is nonzero
        for p in range(16):
            x = np.zeros(16)
            x[p] = 1.0
            _, d = dwt_step(x, DB1)
            assert set(np.flatnonzero(np.abs(d) > 1e-12)) == {p // 2}


class TestInverseDwtStep:
    def test_reference_round_trip(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        a, d = dwt_step(x, DB1)
        assert np.allclose(inverse_dwt_step(a, d, DB1), x, atol=1e-9)

    def test_constant_case(self):
        c = -1.25
        out = inverse_dwt_step([c * SQRT2, c * SQRT2], [0.0, 0.0], DB1)
        assert np.allclose(out, [c, c, c, c])

    def test_round_trip_on_seeded_vectors(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(64):
            length = 2 * int(rng.integers(1, 33))
            x = rng.normal(size=length)
            a, d = dwt_step(x, DB1)
            worst = max(worst, np.abs(inverse_dwt_step(a, d, DB1) - x).max())
        assert worst < 1e-9

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            inverse_dwt_step([1.0, 2.0], [1.0], DB1)


class TestMultilevel:
    def test_band_lengths_for_reference_window(self):
        bands = multilevel_dwt(np.arange(10.0), DB1, 3)
        assert [name for name, _ in bands] == ["A3", "D3", "D2", "D1"]
        assert [c.size for _, c in bands] == oracle_band_lengths(10, 3) == [2, 2, 3, 5]

    def test_single_level_equals_dwt_step(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=10)
        bands = multilevel_dwt(x, DB1, 1)
        a, d = dwt_step(x, DB1)
        assert np.allclose(bands[0][1], a)
        assert np.allclose(bands[1][1], d)

    def test_zero_signal(self):
        bands = multilevel_dwt(np.zeros(16), DB1, 3)
        assert all(np.array_equal(c, np.zeros_like(c)) for _, c in bands)

    def test_level_cap(self):
        assert max_levels(10) == 3
        with pytest.raises(ValueError, match="exceed"):
            multilevel_dwt(np.zeros(10), DB1, 4)

    def test_band_lengths_follow_recurrence(self):
        for length in (4, 7, 10, 16, 33):
            levels = max_levels(length)
            bands = multilevel_dwt(np.arange(float(length)), DB1, levels)
            assert [c.size for _, c in bands] == oracle_band_lengths(length, levels)

    def test_impulse_support_multilevel(self):
        # power-of-two length avoids boundary extension, so band supports
        # are exact dyadic intervals
        for p in range(16):
            x = np.zeros(16)
            x[p] = 1.0
            bands = dict(multilevel_dwt(x, DB1, 3))
            for j in (1, 2, 3):
                nz = set(np.flatnonzero(np.abs(bands[f"D{j}"]) > 1e-12))
                assert nz == {p // 2**j}, (p, j)
            assert set(np.flatnonzero(np.abs(bands["A3"]) > 1e-12)) == {p // 8}


class TestCoefficientImage:
    def test_reference_shape(self):
        window = np.arange(30.0).reshape(10, 3)
        image = coefficient_image(window, DB1, 3)
        assert image.shape == (12, 3)
        assert len(image.row_labels) == 12
        assert image.row_labels[0] == "A3[0]"
        assert image.row_labels[-1] == "D1[4]"

    def test_identical_feature_columns(self):
        col = np.random.default_rng(13).normal(size=10)
        window = np.column_stack([col, col, col])
        image = coefficient_image(window, DB1, 3)
        assert np.array_equal(image.pixels[:, 0], image.pixels[:, 1])
        assert np.array_equal(image.pixels[:, 0], image.pixels[:, 2])

    def test_zero_window(self):
        image = coefficient_image(np.zeros((10, 4)), DB1, 3)
        assert np.array_equal(image.pixels, np.zeros((12, 4)))

    def test_column_independence(self):
        rng = np.random.default_rng(14)
        window = rng.normal(size=(10, 3))
        image = coefficient_image(window, DB1, 3)
        perturbed = window.copy()
        perturbed[:, 2] += 1.0
        image2 = coefficient_image(perturbed, DB1, 3)
        assert np.array_equal(image.pixels[:, :2], image2.pixels[:, :2])
        assert not np.array_equal(image.pixels[:, 2], image2.pixels[:, 2])

    def test_energy_matches_bands(self):
        rng = np.random.default_rng(15)
        window = rng.normal(size=(16, 2))
        image = coefficient_image(window, DB1, 3)
        # orthonormal transform of each even-length column preserves energy
        assert (image.pixels**2).sum() == pytest.approx((window**2).sum(), abs=1e-9)

    def test_debug_export_round_trip(self, tmp_path):
        window = np.random.default_rng(16).normal(size=(10, 3))
        image = coefficient_image(window, DB1, 3)
        csv_path = tmp_path / "image.csv"
        labels_path = tmp_path / "image_rows.json"
        export_image_csv(image, csv_path, labels_path, ["s0", "s1", "s2"])
        back = load_csv(csv_path)
        assert np.array_equal(back.values, image.pixels)
        assert back.feature_names == ["s0", "s1", "s2"]
        assert labels_path.is_file()


class TestFilterBank:
    def test_db1_registry(self):
        bank = get_filter_bank("db1")
        assert bank is DB1
        assert np.allclose(bank.lowpass, [1 / SQRT2, 1 / SQRT2])
        assert np.allclose(bank.highpass, [1 / SQRT2, -1 / SQRT2])

    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError, match="orthonormal"):
            FilterBank("bad", (1.0, 1.0), (1.0, -1.0))

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="unknown wavelet"):
            get_filter_bank("sym4")
