"""Orbital grid construction, Gaussian builders and cube file I/O tests.

Moment oracles: for amplitude exp(-x^2 / 2w^2) the density is a Gaussian
with standard deviation w/sqrt(2); multiplying the amplitude by x gives a
density x^2 exp(-x^2/w^2) whose standard deviation is sqrt(3/2) * w.
"""

import numpy as np
import pytest

from odmrsense import (
    BOHR_RADIUS_ANGSTROM,
    CubeParseError,
    GridMismatchError,
    InvalidParameterError,
    OrbitalGrid,
    assert_commensurate,
    gaussian_orbital,
    homo_lumo_shift,
    load_cube,
    make_grid,
    orbital_stats,
    save_cube,
)


def default_orbital(center=(0.0, 0.0, 0.0), widths=(3.0, 1.2, 0.5),
                    node_axis=None, dims=(48, 32, 24)):
    origin, axes = make_grid(dims, (24.0, 12.0, 8.0))
    return gaussian_orbital(origin, axes, dims, center, widths, node_axis)


class TestGridGeometry:
    def test_make_grid_centered(self):
        origin, axes = make_grid((10, 10, 10), (5.0, 5.0, 5.0))
        # cell-centered: first voxel at -L/2 + step/2
        assert np.allclose(origin, -2.5 + 0.25)
        assert np.allclose(axes, np.diag([0.5, 0.5, 0.5]))

    def test_positions_span(self):
        orb = default_orbital(dims=(8, 8, 8))
        pos = orb.positions()
        assert pos.shape == (8, 8, 8, 3)
        # symmetric about the requested center
        assert np.allclose(pos.mean(axis=(0, 1, 2)), 0.0, atol=1e-12)

    def test_voxel_volume(self):
        origin, axes = make_grid((10, 20, 40), (10.0, 10.0, 10.0))
        grid = OrbitalGrid(origin, axes, np.ones((10, 20, 40)))
        assert grid.voxel_volume == pytest.approx(1.0 * 0.5 * 0.25)

    def test_shape_validation(self):
        origin, axes = make_grid((4, 4, 4), (1.0, 1.0, 1.0))
        with pytest.raises(InvalidParameterError):
            OrbitalGrid(origin, axes, np.ones((4, 4)))

    def test_commensurate_mismatch(self):
        a = default_orbital(dims=(8, 8, 8))
        b = default_orbital(dims=(8, 8, 10))
        with pytest.raises(GridMismatchError):
            assert_commensurate(a, b)

    def test_commensurate_origin_shift(self):
        a = default_orbital(dims=(8, 8, 8))
        b = OrbitalGrid(a.origin + 0.5, a.axes, a.values)
        with pytest.raises(GridMismatchError):
            assert_commensurate(a, b)


class TestGaussianOrbital:
    def test_normalized(self):
        orb = default_orbital()
        assert orb.norm_squared() == pytest.approx(1.0, rel=1e-12)

    def test_centroid_and_spread(self):
        orb = default_orbital(center=(1.0, -0.5, 0.25))
        stats = orbital_stats(orb)
        assert np.allclose(stats.centroid, (1.0, -0.5, 0.25), atol=1e-9)
        # 1e-5 headroom for second-moment truncation at the box edge
        assert np.allclose(stats.spread,
                           np.array([3.0, 1.2, 0.5]) / np.sqrt(2.0), rtol=1e-5)

    def test_node_axis_spread(self):
        orb = default_orbital(node_axis=0)
        stats = orbital_stats(orb)
        # node along x inflates only the x spread
        assert stats.spread[0] == pytest.approx(np.sqrt(1.5) * 3.0, rel=1e-5)
        assert stats.spread[1] == pytest.approx(1.2 / np.sqrt(2.0), rel=1e-5)
        assert np.allclose(stats.centroid, 0.0, atol=1e-9)

    def test_node_axis_odd_symmetry(self):
        orb = default_orbital(node_axis=2, dims=(16, 16, 16))
        assert np.allclose(orb.values, -orb.values[:, :, ::-1], atol=1e-15)

    def test_bad_node_axis(self):
        with pytest.raises(InvalidParameterError):
            default_orbital(node_axis=3)

    def test_bad_widths(self):
        with pytest.raises(InvalidParameterError):
            default_orbital(widths=(1.0, 0.0, 1.0))


class TestShiftMetric:
    def test_homo_lumo_shift_in_pm(self):
        homo = orbital_stats(default_orbital())
        lumo = orbital_stats(
            default_orbital(center=(0.04, 0.01, 0.005), node_axis=0))
        shift = homo_lumo_shift(homo, lumo)
        assert np.allclose(shift, (4.0, 1.0, 0.5), atol=0.01)


class TestCubeIO:
    def test_round_trip(self, tmp_path):
        orb = default_orbital(dims=(12, 10, 8))
        path = tmp_path / "orb.cube"
        save_cube(orb, path, comment="homo")
        back = load_cube(path)
        assert back.dims == orb.dims
        assert np.allclose(back.origin, orb.origin, atol=1e-10)
        assert np.allclose(back.axes, orb.axes, atol=1e-12)
        assert np.allclose(back.values, orb.values, rtol=1e-8, atol=1e-12)

    def test_handcrafted_bohr_cube(self, tmp_path):
        # 2x2x2 grid, volumetric values enumerate z fastest
        text = (
            "made by hand\n"
            "density block\n"
            "0 0.0 0.0 0.0\n"
            "2 1.0 0.0 0.0\n"
            "2 0.0 1.0 0.0\n"
            "2 0.0 0.0 1.0\n"
            "0 1 2 3 4 5 6\n"
            "7\n"
        )
        path = tmp_path / "tiny.cube"
        path.write_text(text)
        grid = load_cube(path)
        assert grid.dims == (2, 2, 2)
        # natoms >= 0 means Bohr coordinates, converted on load
        assert np.allclose(np.diag(grid.axes), BOHR_RADIUS_ANGSTROM)
        assert grid.values[0, 0, 1] == 1.0
        assert grid.values[0, 1, 0] == 2.0
        assert grid.values[1, 0, 0] == 4.0
        assert grid.values[1, 1, 1] == 7.0

    def test_negative_natoms_angstrom(self, tmp_path):
        text = (
            "c1\nc2\n"
            "-1 0.25 0.0 0.0\n"
            "2 0.5 0.0 0.0\n"
            "2 0.0 0.5 0.0\n"
            "2 0.0 0.0 0.5\n"
            "6 6.0 0.0 0.0 0.0\n"
            "1 2 3 4 5 6 7 8\n"
        )
        path = tmp_path / "ang.cube"
        path.write_text(text)
        grid = load_cube(path)
        # negative natoms marks coordinates already in angstrom
        assert np.allclose(grid.origin, (0.25, 0.0, 0.0))
        assert np.allclose(np.diag(grid.axes), 0.5)
        assert grid.values[1, 1, 1] == 8.0

    def test_nonpositive_axis_count(self, tmp_path):
        path = tmp_path / "bad.cube"
        path.write_text("a\nb\n0 0 0 0\n0 1.0 0.0 0.0\n2 0 1 0\n2 0 0 1\n1\n")
        with pytest.raises(CubeParseError, match=r"bad\.cube:4"):
            load_cube(path)

    def test_too_few_values(self, tmp_path):
        path = tmp_path / "short.cube"
        path.write_text("a\nb\n0 0 0 0\n2 1 0 0\n2 0 1 0\n2 0 0 1\n1 2 3\n")
        with pytest.raises(CubeParseError, match="expected 8"):
            load_cube(path)

    def test_too_many_values(self, tmp_path):
        path = tmp_path / "long.cube"
        path.write_text("a\nb\n0 0 0 0\n2 1 0 0\n2 0 1 0\n2 0 0 1\n"
                        "1 2 3 4 5 6 7 8 9\n")
        with pytest.raises(CubeParseError, match="too many"):
            load_cube(path)

    def test_garbled_number_reports_line(self, tmp_path):
        path = tmp_path / "junk.cube"
        path.write_text("a\nb\n0 0 0 zap\n2 1 0 0\n2 0 1 0\n2 0 0 1\n1\n")
        with pytest.raises(CubeParseError, match=r"junk\.cube:3"):
            load_cube(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "trunc.cube"
        path.write_text("a\nb\n0 0 0 0\n")
        with pytest.raises(CubeParseError):
            load_cube(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CubeParseError):
            load_cube(tmp_path / "nope.cube")
