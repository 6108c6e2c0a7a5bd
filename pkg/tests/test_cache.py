import logging
import struct

import numpy as np
import pytest

from cyltfm import CylinderGeometry
from cyltfm import cache as cache_mod
from cyltfm.cache import CACHE_ENV, CacheError, ModelCache, _decode, _encode, cache_key, default_cache_dir
from cyltfm.model import ChannelModel

GEOM = CylinderGeometry()
Q = (2, 3, 5)


@pytest.fixture
def store(tmp_path):
    return ModelCache(tmp_path / "c")


def _same(a: ChannelModel, b: ChannelModel):
    np.testing.assert_array_equal(a.eigensystem.roots, b.eigensystem.roots)
    np.testing.assert_array_equal(a.eigensystem.N_mu, b.eigensystem.N_mu)
    for Ka, Kb in ((a.K_uni, b.K_uni), (a.K_par, b.K_par)):
        np.testing.assert_array_equal(Ka.axial, Kb.axial)
        for x, y in zip(Ka.radial, Kb.radial):
            np.testing.assert_array_equal(x, y)


def test_round_trip_is_bit_identical(store):
    model = ChannelModel.build(GEOM, Q)
    store.put(model)
    back = store.get(GEOM, Q)
    _same(model, back)
    A1 = model.closed_loop(2.5, 50.0)
    A2 = back.closed_loop(2.5, 50.0)
    for x, y in zip(A1.blocks, A2.blocks):
        np.testing.assert_array_equal(x, y)


def test_key_excludes_D_and_v0(store):
    model, hit = store.get_or_build(GEOM, Q)
    assert not hit
    m2, hit = store.get_or_build(GEOM, Q)
    assert hit
    # any (D, v0) is served from the same entry
    np.testing.assert_array_equal(m2.closed_loop(0.025, 50.0).dense(), model.closed_loop(0.025, 50.0).dense())


def test_key_changes_miss(store):
    store.get_or_build(GEOM, Q)
    assert store.get(GEOM, (2, 4, 5)) is None
    assert store.get(CylinderGeometry(1.0, 12.0), Q) is None


def test_key_quantization():
    a = cache_key(CylinderGeometry(1.0, 10.0), Q)
    assert a == "R0=1;Z0=10;N=2;M=3;L=5"
    assert cache_key(CylinderGeometry(1.0 + 1e-14, 10.0), Q) == a
    assert cache_key(CylinderGeometry(1.0 + 1e-9, 10.0), Q) != a


def test_corrupt_entry_is_rebuilt(store, caplog):
    model, _ = store.get_or_build(GEOM, Q)
    path = store.path(GEOM, Q)
    blob = bytearray(path.read_bytes())
    blob[200] ^= 0xFF
    path.write_bytes(bytes(blob))
    with caplog.at_level(logging.WARNING, logger="cyltfm.cache"):
        assert store.get(GEOM, Q) is None
    assert "checksum" in caplog.text
    rebuilt, hit = store.get_or_build(GEOM, Q)
    assert not hit
    _same(model, rebuilt)
    assert store.get(GEOM, Q) is not None


def test_truncated_entry_is_absent(store):
    store.get_or_build(GEOM, Q)
    path = store.path(GEOM, Q)
    path.write_bytes(path.read_bytes()[:40])
    assert store.get(GEOM, Q) is None


def test_version_mismatch_forces_rebuild(store, monkeypatch):
    store.get_or_build(GEOM, Q)
    monkeypatch.setattr(cache_mod, "FORMAT_VERSION", 2)
    assert store.get(GEOM, Q) is None
    _, hit = store.get_or_build(GEOM, Q)
    assert not hit
    assert store.get(GEOM, Q) is not None


def test_encoding_layout():
    blob = _encode({"a": np.array([1.5, -2.0]), "c": np.array([1 + 2j])}, {"k": 1})
    magic, version, hlen = struct.unpack_from("<8sII", blob)
    assert magic == b"CYLTFMC\x00" and version == 1
    body = blob[16 + hlen : -32]
    assert body == struct.pack("<4d", 1.5, -2.0, 1.0, 2.0)
    meta, arrays = _decode(blob)
    assert meta == {"k": 1}
    np.testing.assert_array_equal(arrays["c"], [1 + 2j])
    with pytest.raises(CacheError):
        _decode(b"x" * 10)


def test_invalidate(store):
    store.get_or_build(GEOM, Q)
    assert store.invalidate(GEOM, Q)
    assert not store.invalidate(GEOM, Q)
    assert store.get(GEOM, Q) is None


def test_no_temporary_files_left(store):
    store.get_or_build(GEOM, Q)
    assert not [p for p in store.directory.iterdir() if p.name.startswith(".tmp-")]


def test_cache_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "env"))
    assert default_cache_dir() == tmp_path / "env"
    assert ModelCache().directory == tmp_path / "env"
