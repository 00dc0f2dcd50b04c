import numpy as np
import pytest

from errors import ContainerFormatError
from geometry.curves import great_circles_curve
from recon.dataset import DirectionGrid, acquire_dataset
from recon.operators import WField, WParams
from storage.grid_container import (
    load_dataset,
    load_probes,
    load_scalar_grid,
    load_sinogram,
    load_tensor_grid,
    load_wfield,
    read_grid,
    save_dataset,
    save_probes,
    save_scalar_grid,
    save_sinogram,
    save_tensor_grid,
    save_wfield,
    write_grid,
)
from transforms.fields import ScalarGrid
from transforms.quadrature import sphere_grid
from transforms.xforms import Sinogram, uniform_p_grid


def test_raw_container_layout(tmp_path, rng):
    path = str(tmp_path / "raw.grid")
    payload = rng.normal(size=(3, 4))
    write_grid(path, "scalar", payload, {"note": "raw"})
    raw = open(path, "rb").read()
    header_line, body = raw.split(b"\n", 1)
    assert header_line.startswith(b'{"byte_order": "little"')
    assert body == payload.astype("<f8").tobytes()

    header, values = read_grid(path, "scalar")
    assert header["payload_shape"] == [3, 4] and header["note"] == "raw"
    np.testing.assert_array_equal(values, payload)


def test_rewrites_are_byte_identical(tmp_path, vector_bump):
    grid = vector_bump.rasterize((9, 9, 9))
    first, second = tmp_path / "a.grid", tmp_path / "b.grid"
    save_tensor_grid(str(first), grid)
    save_tensor_grid(str(second), load_tensor_grid(str(first)))
    assert first.read_bytes() == second.read_bytes()


def test_tensor_grid_round_trip(tmp_path, vector_bump):
    grid = vector_bump.rasterize((9, 9, 9), order=3)
    path = str(tmp_path / "f.grid")
    save_tensor_grid(path, grid)
    loaded = load_tensor_grid(path)
    np.testing.assert_array_equal(loaded.values, grid.values)
    assert loaded.tensor_order == 1 and loaded.order == 3
    np.testing.assert_array_equal(loaded.support.center, grid.support.center)
    x = np.array([[0.1, 0.2, -0.3]])
    np.testing.assert_array_equal(loaded.sample(x), grid.sample(x))


def test_scalar_grid_round_trip(tmp_path):
    grid = ScalarGrid.from_function(lambda x: np.sum(x, axis=1), [-1.0] * 3, [1.0] * 3, (5, 6, 7))
    path = str(tmp_path / "s.grid")
    save_scalar_grid(path, grid)
    loaded = load_scalar_grid(path)
    assert loaded.shape == (5, 6, 7) and loaded.support is None
    np.testing.assert_array_equal(loaded.values, grid.values)


def test_sinogram_round_trip(tmp_path, rng):
    sinogram = Sinogram(sphere_grid(3, 2, 4), uniform_p_grid(1.0, 5), rng.normal(size=(8, 5)), smoothing=True)
    path = str(tmp_path / "r.grid")
    save_sinogram(path, sinogram)
    loaded = load_sinogram(path)
    np.testing.assert_array_equal(loaded.values, sinogram.values)
    np.testing.assert_array_equal(loaded.p_grid, sinogram.p_grid)
    np.testing.assert_array_equal(loaded.sphere.weights, sinogram.sphere.weights)
    assert loaded.smoothing


def test_dataset_round_trip_and_curve_check(tmp_path, vector_bump, three_circles):
    data = acquire_dataset(vector_bump, three_circles, 4, DirectionGrid(3, 2, 4), step=0.1, seed=1)
    path = str(tmp_path / "d.grid")
    save_dataset(path, data)
    loaded = load_dataset(path, great_circles_curve(2.0))
    np.testing.assert_array_equal(loaded.values, data.values)
    assert loaded.channels == data.channels and loaded.seed == 1
    xi = np.array([[0.3, 0.4, -0.866]])
    np.testing.assert_array_equal(loaded.measure(1, 0.7, xi), data.measure(1, 0.7, xi))
    with pytest.raises(ContainerFormatError):
        load_dataset(path, great_circles_curve(3.0))


def test_wfield_keeps_exclusion_mask(tmp_path, rng):
    valid = np.ones((8, 5, 2), dtype=bool)
    valid[3, 1, 0] = valid[7, 4, 1] = False
    wfield = WField(sphere_grid(3, 2, 4), uniform_p_grid(1.0, 5), (0, 1), rng.normal(size=(8, 5, 2, 2)), valid,
                    WParams(transport="omit", circle_nodes=12), "tensor", 1, np.full(3, -1.0), np.full(3, 1.0))
    path = str(tmp_path / "w.grid")
    save_wfield(path, wfield)
    loaded = load_wfield(path)
    np.testing.assert_array_equal(loaded.valid, valid)
    np.testing.assert_array_equal(loaded.values, wfield.values)
    assert loaded.params == wfield.params and loaded.channels == (0, 1)


def test_probes_round_trip(tmp_path, rng):
    points, values = rng.normal(size=(4, 3)), rng.normal(size=(4, 6))
    path = str(tmp_path / "p.grid")
    save_probes(path, points, values, "tensor", 2)
    header, got_points, got_values = load_probes(path)
    assert header["order"] == 2
    np.testing.assert_array_equal(got_points, points)
    np.testing.assert_array_equal(got_values, values)


def test_malformed_containers(tmp_path, rng):
    path = tmp_path / "bad.grid"
    path.write_bytes(b"not json\n")
    with pytest.raises(ContainerFormatError):
        read_grid(str(path))
    path.write_bytes(b"no newline at all")
    with pytest.raises(ContainerFormatError):
        read_grid(str(path))
    with pytest.raises(ContainerFormatError):
        read_grid(str(tmp_path / "missing.grid"))

    good = str(tmp_path / "good.grid")
    write_grid(good, "scalar", rng.normal(size=(2, 2)), {})
    raw = open(good, "rb").read()
    (tmp_path / "short.grid").write_bytes(raw[:-8])
    with pytest.raises(ContainerFormatError):
        read_grid(str(tmp_path / "short.grid"))
    with pytest.raises(ContainerFormatError):
        read_grid(good, "tensor")
    with pytest.raises(ContainerFormatError):
        write_grid(good, "mesh", np.zeros(2), {})
