import struct

import numpy as np
import pytest

from spikescan.serialize import MAGIC, load_tensors, save_tensors


def test_roundtrip_all_ranks(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "scalar": np.array(3.5),
        "vec": rng.normal(size=7),
        "mat": rng.normal(size=(3, 4)),
        "cube": rng.normal(size=(2, 3, 5)),
    }
    path = tmp_path / "params.spkn"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        np.testing.assert_array_equal(loaded[name], arr)
        assert loaded[name].dtype == np.float64


def test_byte_layout_golden(tmp_path):
    path = tmp_path / "one.spkn"
    save_tensors(path, {"ab": np.array([1.0, 2.0])})
    raw = path.read_bytes()
    expected = (MAGIC + struct.pack("<I", 2) + b"ab" + struct.pack("<I", 1)
                + struct.pack("<Q", 2)
                + np.array([1.0, 2.0], dtype="<f8").tobytes())
    assert raw == expected


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.spkn"
    path.write_bytes(b"NOPE!" + b"\x00" * 16)
    with pytest.raises(ValueError):
        load_tensors(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "trunc.spkn"
    save_tensors(path, {"x": np.arange(4.0)})
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_tensors(path)


def test_deterministic_bytes(tmp_path):
    tensors = {"w": np.linspace(0, 1, 11), "b": np.zeros(3)}
    p1, p2 = tmp_path / "a.spkn", tmp_path / "b.spkn"
    save_tensors(p1, tensors)
    save_tensors(p2, tensors)
    assert p1.read_bytes() == p2.read_bytes()


def test_params_roundtrip_through_container(tmp_path):
    from spikescan.neurons import DsnParams

    params = DsnParams.init(channels=3, k=4, seed=5, mix=True)
    path = tmp_path / "dsn.spkn"
    save_tensors(path, params.state_dict())
    restored = DsnParams.from_state_dict(load_tensors(path))
    np.testing.assert_array_equal(restored.conv_kernel.data,
                                  params.conv_kernel.data)
    np.testing.assert_array_equal(restored.channel_mix.data,
                                  params.channel_mix.data)
    assert restored.tau == params.tau
    assert restored.n_max == params.n_max
