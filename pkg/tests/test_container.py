import numpy as np
import pytest

from campulse.container import ContainerError, read_container, write_container


def test_round_trip(tmp_path, rng):
    tensors = {
        "weights": rng.standard_normal((3, 4)).astype(np.float32),
        "bias": rng.standard_normal(7),
        "scalar": np.float64(30.0),
    }
    path = tmp_path / "t.rmtc"
    write_container(path, tensors, trailer="hello config")
    back, trailer = read_container(path)
    assert trailer == b"hello config"
    assert set(back) == set(tensors)
    for name in tensors:
        got = back[name]
        want = np.asarray(tensors[name])
        assert got.dtype == want.dtype
        assert got.shape == want.shape
        assert np.array_equal(got, want)


def test_empty_trailer_and_zero_tensors(tmp_path):
    path = tmp_path / "e.rmtc"
    write_container(path, {})
    tensors, trailer = read_container(path)
    assert tensors == {} and trailer == b""


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.rmtc"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ContainerError, match="magic"):
        read_container(path)


def test_truncated_file(tmp_path, rng):
    path = tmp_path / "t.rmtc"
    write_container(path, {"x": rng.standard_normal(100)})
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 32])
    with pytest.raises(ContainerError, match="truncated"):
        read_container(path)


def test_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(ContainerError, match="dtype"):
        write_container(tmp_path / "i.rmtc", {"x": np.arange(3, dtype=np.int32)})
