import math

import numpy as np
import pytest

from src.ingestion.data_loader import (
    count_duplicates,
    ingest,
    ingest_with_report,
    load_station_records,
    station_coordinates,
)
from src.utils.constants import EARTH_RADIUS_KM
from src.utils.errors import ConfigError, DegenerateWindowError, IngestError
from src.utils.geo_utils import equirectangular_project, haversine_distance, projection_distortion
from tests.conftest import write_station_csv


class TestPlanar:
    def test_three_rows(self, planar_csv):
        pattern = ingest(planar_csv, "planar")
        assert pattern.n == 3
        w = pattern.window
        assert (w.x_min, w.x_max, w.y_min, w.y_max) == (0.0, 2.0, 0.0, 3.0)

    def test_normalized(self, planar_csv):
        pattern = ingest(planar_csv, "planar", normalize=True)
        np.testing.assert_allclose(pattern.coords, [[0.0, 0.0], [1.0, 1.0 / 3.0], [0.5, 1.0]])
        assert pattern.window.area() == 1.0

    def test_extra_columns_and_case(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["ID", "X", "Y", "operator"],
                                 [(1, 0.0, 0.0, "a"), (2, 1.0, 1.0, "b")])
        assert ingest(path, "planar").n == 2

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("id,x,y\na,0,0\n\nb,1,1\n")
        assert ingest(path, "planar").n == 2

    def test_duplicates_are_kept_and_counted(self, tmp_path, caplog):
        path = write_station_csv(tmp_path / "s.csv", ["id", "x", "y"],
                                 [("a", 0, 0), ("b", 0, 0), ("c", 1, 2)])
        with caplog.at_level("WARNING"):
            pattern, report = ingest_with_report(path, "planar")
        assert pattern.n == 3
        assert report.n_duplicates == 1
        assert "duplicate" in caplog.text
        assert report.to_dict()["projection_distortion"] is None

    def test_flat_axis_is_widened(self, tmp_path, caplog):
        path = write_station_csv(tmp_path / "s.csv", ["id", "x", "y"], [("a", 2, 0), ("b", 2, 5)])
        with caplog.at_level("WARNING"):
            pattern = ingest(path, "planar")
        w = pattern.window
        assert (w.x_min, w.x_max, w.y_min, w.y_max) == (-0.5, 4.5, 0.0, 5.0)
        assert "share x" in caplog.text

    def test_coincident_stations_are_degenerate(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["id", "x", "y"], [("a", 1, 1), ("b", 1, 1)])
        with pytest.raises(DegenerateWindowError):
            ingest(path, "planar")


class TestMalformed:
    def test_non_numeric_rows_named(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["id", "x", "y"],
                                 [("a", 0, 0), ("b", "east", 1), ("c", 1, 1), ("d", 2, "")])
        with pytest.raises(IngestError) as info:
            ingest(path, "planar")
        assert info.value.line_numbers == [3, 5]

    def test_latitude_out_of_range(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["id", "lon", "lat"],
                                 [("a", 10.0, 45.0), ("b", 11.0, 95.0), ("c", 12.0, 46.0)])
        with pytest.raises(IngestError) as info:
            ingest(path, "geographic")
        assert info.value.line_numbers == [3]

    def test_wrong_header(self, planar_csv):
        with pytest.raises(IngestError) as info:
            ingest(planar_csv, "geographic")
        assert info.value.line_numbers == [1]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(IngestError):
            ingest(path, "planar")

    def test_header_only(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text("id,x,y\n")
        with pytest.raises(IngestError):
            ingest(path, "planar")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestError):
            ingest(tmp_path / "nope.csv", "planar")

    def test_unknown_mode(self, planar_csv):
        with pytest.raises(ConfigError):
            ingest(planar_csv, "polar")


class TestGeographic:
    def test_same_latitude_spacing(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["id", "lon", "lat"],
                                 [("a", 10.0, 45.0), ("b", 11.0, 45.0), ("c", 13.0, 45.0)])
        xy = station_coordinates(load_station_records(path, "geographic"), "geographic")
        dx = np.diff(xy[:, 0])
        expected = EARTH_RADIUS_KM * math.radians(1.0) * math.cos(math.radians(45.0))
        assert dx[0] == pytest.approx(expected)
        assert dx[1] == pytest.approx(2 * expected)
        np.testing.assert_allclose(xy[:, 1], 0.0, atol=1e-9)

    def test_same_latitude_file_ingests(self, tmp_path, caplog):
        path = write_station_csv(tmp_path / "s.csv", ["id", "lon", "lat"],
                                 [("a", 10.0, 45.0), ("b", 11.0, 45.0), ("c", 13.0, 45.0)])
        with caplog.at_level("WARNING"):
            pattern = ingest(path, "geographic", normalize=True)
        assert pattern.n == 3
        assert pattern.window.area() == pytest.approx(1.0)
        np.testing.assert_allclose(pattern.coords[:, 1], 0.5)
        assert "share y" in caplog.text

    def test_projected_about_centroid(self):
        x, y = equirectangular_project(np.array([9.0, 11.0]), np.array([44.0, 46.0]))
        assert x.sum() == pytest.approx(0.0, abs=1e-9)
        assert y.sum() == pytest.approx(0.0, abs=1e-9)

    def test_report_carries_distortion(self, tmp_path):
        path = write_station_csv(tmp_path / "s.csv", ["id", "lon", "lat"],
                                 [("a", 10.0, 45.0), ("b", 10.1, 45.05), ("c", 10.05, 45.1)])
        pattern, report = ingest_with_report(path, "geographic")
        assert pattern.n == 3
        assert 0.0 <= report.distortion < 0.01

    def test_small_extent_has_small_distortion(self):
        assert projection_distortion(45.0, 10.0, 45.2, 10.3) < 1e-3
        assert haversine_distance(0.0, 0.0, 0.0, 1.0) == pytest.approx(111.19, rel=1e-3)


def test_count_duplicates():
    assert count_duplicates(np.array([[0, 0], [1, 1], [0, 0], [0, 0]])) == 2
    assert count_duplicates(np.zeros((0, 2))) == 0
