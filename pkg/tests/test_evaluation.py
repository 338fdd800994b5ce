import numpy as np
import pytest

from patrec.evaluation import EvalReport, cross_section, rel_mse, write_profile_csv
from patrec.geometry import GridImage
from patrec.phantom import RingSpec, render_ring
from patrec.rng import Rng


def image_of(values, extent=(-4.0, 4.0, -4.0, 4.0)):
    arr = np.asarray(values, dtype=float)
    return GridImage(arr.shape[1], arr.shape[0], extent, arr)


class TestRelMse:
    def _truth(self):
        return image_of(Rng(0).normal(64).reshape(8, 8))

    def test_identical_is_zero(self):
        t = self._truth()
        assert rel_mse(t, t) == 0.0

    def test_zero_recon_is_one(self):
        t = self._truth()
        assert rel_mse(t, t.with_values(np.zeros((8, 8)))) == pytest.approx(1.0)

    def test_double_truth_is_one(self):
        t = self._truth()
        assert rel_mse(t, t.with_values(2 * t.values)) == pytest.approx(1.0)

    def test_error_scaling_quadratic(self):
        t = self._truth()
        e = Rng(1).normal(64).reshape(8, 8)
        one = rel_mse(t, t.with_values(t.values + e))
        two = rel_mse(t, t.with_values(t.values + 2 * e))
        assert two == pytest.approx(4 * one, rel=1e-12)

    def test_zero_truth_rejected(self):
        z = image_of(np.zeros((4, 4)))
        with pytest.raises(ZeroDivisionError):
            rel_mse(z, z)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rel_mse(image_of(np.ones((4, 4))), image_of(np.ones((5, 4))))


class TestCrossSection:
    def test_constant_profile(self):
        img = image_of(np.full((6, 5), 2.0))
        x, v = cross_section(img, row=3)
        assert len(x) == 5 and len(v) == 5
        assert np.all(v == 2.0)

    def test_profile_length_is_width(self):
        img = image_of(Rng(2).normal(7 * 9).reshape(7, 9))
        x, v = cross_section(img, row=0)
        assert len(x) == img.width == 9

    def test_single_ring_two_symmetric_bumps(self):
        grid = GridImage.zeros(256, 256, (-6.0, 6.0, -6.0, 6.0))
        spec = RingSpec((0.0, 0.0), radius=3.0, width=1.0, magnitude=1.0, blur_sigma=0.1, decay_rate=0.0)
        img = render_ring(spec, grid)
        x, v = cross_section(img, y=0.0)
        mid = len(v) // 2
        left_peak = x[np.argmax(v[:mid])]
        right_peak = x[mid + np.argmax(v[mid:])]
        assert abs(left_peak + 3.0) < grid.dx
        assert abs(right_peak - 3.0) < grid.dx
        # symmetric about the ring center up to one pixel
        assert abs(left_peak + right_peak) < 2 * grid.dx

    def test_select_by_physical_y(self):
        img = image_of(np.arange(16.0).reshape(4, 4), extent=(0.0, 4.0, 0.0, 4.0))
        x, v = cross_section(img, y=3.5)  # top row
        assert np.array_equal(v, img.values[0])

    def test_bad_arguments(self):
        img = image_of(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            cross_section(img)
        with pytest.raises(ValueError):
            cross_section(img, row=1, y=0.0)
        with pytest.raises(ValueError):
            cross_section(img, row=17)
        with pytest.raises(ValueError):
            cross_section(img, y=99.0)


class TestEvalReport:
    def test_aggregates_and_text(self):
        rep = EvalReport(files=["a", "b", "c"], manifests=["m.json"])
        rep.add("fbp", [0.3, 0.5, 0.4])
        rep.add("tv", [0.1, 0.2, 0.3])
        assert rep.mean("fbp") == pytest.approx(0.4)
        assert rep.median("tv") == pytest.approx(0.2)
        text = rep.to_text()
        assert "fbp" in text and "m.json" in text and "a,0.3" in text.replace("0.300000", "0.3")
        csv = rep.to_csv()
        assert csv.splitlines()[0] == "file,fbp,tv"

    def test_length_check(self):
        rep = EvalReport(files=["a"])
        with pytest.raises(ValueError):
            rep.add("fbp", [1.0, 2.0])

    def test_report_deterministic(self):
        rep = EvalReport(files=["a", "b"])
        rep.add("fbp", [0.125, 0.25])
        assert rep.to_text() == rep.to_text()
        assert rep.to_csv() == rep.to_csv()


def test_profile_csv(tmp_path):
    x = np.linspace(0, 1, 5)
    cols = {"truth": np.ones(5), "fbp": np.zeros(5)}
    p = tmp_path / "profile.csv"
    write_profile_csv(p, x, cols)
    lines = p.read_text().splitlines()
    assert lines[0] == "x_mm,truth,fbp"
    assert len(lines) == 6
    with pytest.raises(ValueError):
        write_profile_csv(p, x, {"bad": np.ones(3)})
