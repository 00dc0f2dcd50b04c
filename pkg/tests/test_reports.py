import numpy as np

from storage.reports import read_probe_csv, summary_text, write_probe_csv, write_report


def test_probe_csv_columns_and_exact_values(tmp_path):
    points = np.array([[0.1, 0.2, 0.3], [-0.5, 0.0, 1.0 / 3.0]])
    estimate = np.array([[1.0 / 7.0, 2.0], [np.pi, -1e-300]])
    truth = np.array([[0.125, 2.0], [3.0, 0.0]])
    path = str(tmp_path / "reports" / "probes.csv")
    write_probe_csv(path, points, estimate, ["0", "1"], truth)

    columns, rows = read_probe_csv(path)
    assert columns == ["x1", "x2", "x3", "est_0", "est_1", "true_0", "true_1", "err_0", "err_1"]
    np.testing.assert_array_equal(rows[:, :3], points)
    np.testing.assert_array_equal(rows[:, 3:5], estimate)
    np.testing.assert_array_equal(rows[:, 7:], np.abs(estimate - truth))


def test_probe_csv_without_truth(tmp_path):
    path = str(tmp_path / "probes.csv")
    write_probe_csv(path, [[0.0, 0.0, 0.0]], [[np.nan]], ["00"])
    columns, rows = read_probe_csv(path)
    assert columns == ["x1", "x2", "x3", "est_00"]
    assert np.isnan(rows[0, 3])


def test_summary_text_formats_floats_exactly(tmp_path):
    text = summary_text([("relative_l2", 0.1), ("probes", 3), ("family", "tensor")])
    assert text == "relative_l2: 0.10000000000000001\nprobes: 3\nfamily: tensor\n"
    path = tmp_path / "out" / "summary.txt"
    write_report(str(path), text)
    assert path.read_text() == text
