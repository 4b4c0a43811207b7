import numpy as np
import numpy.testing as npt
import pytest

from ppselect.geometry import CovariateField, PointPattern, Window
from ppselect.io import (
    read_csv,
    read_pattern,
    read_raster,
    write_csv,
    write_pattern,
    write_raster,
)

AWKWARD = [0.1 + 0.2, 1.0 / 3.0, 1e-300, 1e300, -0.0, 2.0 ** -52,
           123456789.123456789, np.pi]


class TestCsv:
    def test_float_round_trip_is_bit_exact(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv({"v": AWKWARD}, path)
        back = [float(s) for s in read_csv(path)["v"]]
        assert all(a == b for a, b in zip(back, AWKWARD))

    def test_column_order_preserved(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv([("b", [1]), ("a", [2])], path)
        assert list(read_csv(path)) == ["b", "a"]
        assert path.read_text().splitlines()[0] == "b,a"

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(Exception, match="nope.csv"):
            read_csv(tmp_path / "nope.csv")


class TestPattern:
    def test_round_trip(self, tmp_path):
        w = Window(0.25, 7.75, -1.5, 3.5)
        p = PointPattern(AWKWARD[:0] + [0.3, 7.1, 1.0 / 3.0 + 1],
                         [2.9, -0.7, 0.1 + 0.2], w)
        path = tmp_path / "p.csv"
        write_pattern(p, path, metadata={"seed": 9})
        q = read_pattern(path)
        npt.assert_array_equal(q.x, p.x)
        npt.assert_array_equal(q.y, p.y)
        assert q.window == w

    def test_empty_round_trip(self, tmp_path):
        p = PointPattern([], [], Window(0, 1, 0, 1))
        path = tmp_path / "p.csv"
        write_pattern(p, path)
        assert read_pattern(path).n == 0

    def test_missing_window_comment_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x,y\n0.5,0.5\n")
        with pytest.raises(Exception, match="window"):
            read_pattern(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("# window 0 1 0 1\na,b\n0.5,0.5\n")
        with pytest.raises(Exception):
            read_pattern(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("# window 0 1 0 1\nx,y\n0.5\n")
        with pytest.raises(Exception):
            read_pattern(path)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(Exception, match="gone.csv"):
            read_pattern(tmp_path / "gone.csv")


class TestRaster:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        f = CovariateField("soil", -1.25, 0.5, 1.0 / 3.0, 0.7,
                           rng.normal(size=(3, 4)) * 1e-7)
        path = tmp_path / "soil.txt"
        write_raster(f, path)
        g = read_raster(path, name="soil")
        assert (g.x0, g.y0, g.dx, g.dy) == (f.x0, f.y0, f.dx, f.dy)
        npt.assert_array_equal(g.values, f.values)

    def test_name_defaults_to_file_stem(self, tmp_path):
        f = CovariateField("x", 0.0, 0.0, 1.0, 1.0, np.ones((1, 1)))
        path = tmp_path / "elevation.txt"
        write_raster(f, path)
        assert read_raster(path).name == "elevation"

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(Exception, match="void.txt"):
            read_raster(tmp_path / "void.txt")
