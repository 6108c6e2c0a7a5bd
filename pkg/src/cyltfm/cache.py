"""On-disk cache of geometry-only model data (roots and feedback factors).

Layout of one entry::

    magic (8 bytes) | version (u4) | header length (u4) | JSON header
    | little-endian float64 arrays in header order | sha256 of all previous bytes

Complex arrays are written as interleaved real/imaginary pairs. Writes go to a
temporary file that is renamed into place, and every key is serialized with
a file lock.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from filelock import FileLock

from .eigensystem import EigenSystem, ModeTable
from .flow_coupling import FeedbackMatrices
from .geometry import CylinderGeometry
from .model import ChannelModel

__all__ = ["CACHE_ENV", "FORMAT_VERSION", "CacheError", "ModelCache", "cache_key", "default_cache_dir"]

log = logging.getLogger(__name__)

CACHE_ENV = "CYLTFM_CACHE_DIR"
MAGIC = b"CYLTFMC\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


class CacheError(ValueError):
    """Entry is corrupt, truncated or from another format version."""


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "cyltfm"


def cache_key(geometry: CylinderGeometry, q) -> str:
    """``(R0, Z0, N, M, L)`` with the lengths rounded to 12 significant digits."""
    N, M, L = (int(v) for v in q)
    return f"R0={geometry.R0:.12g};Z0={geometry.Z0:.12g};N={N};M={M};L={L}"


def _encode(arrays: dict, meta: dict) -> bytes:
    entries = []
    chunks = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        cplx = np.iscomplexobj(arr)
        data = arr.astype("<c16" if cplx else "<f8", copy=False)
        entries.append({"name": name, "shape": list(arr.shape), "complex": cplx})
        chunks.append(np.ascontiguousarray(data).tobytes())
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode()
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def _decode(blob: bytes):
    if len(blob) < _PREFIX.size + 32:
        raise CacheError("entry truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheError("checksum mismatch")
    magic, version, hlen = _PREFIX.unpack_from(body)
    if magic != MAGIC:
        raise CacheError("bad magic")
    if version != FORMAT_VERSION:
        raise CacheError(f"format version {version}, expected {FORMAT_VERSION}")
    off = _PREFIX.size
    header = json.loads(body[off : off + hlen])
    off += hlen
    arrays = {}
    for e in header["arrays"]:
        dt = np.dtype("<c16" if e["complex"] else "<f8")
        count = int(np.prod(e["shape"], dtype=np.int64))
        arr = np.frombuffer(body, dtype=dt, count=count, offset=off).reshape(e["shape"])
        arrays[e["name"]] = arr.astype(dt.newbyteorder("="))
        off += count * dt.itemsize
    if off != len(body):
        raise CacheError("trailing bytes in entry")
    return header["meta"], arrays


class ModelCache:
    """Directory of cached :class:`~cyltfm.model.ChannelModel` geometry data.

    The key excludes ``D`` and ``v0``: both enter only when the closed-loop
    matrix is assembled.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()

    def path(self, geometry, q) -> Path:
        h = hashlib.sha256(cache_key(geometry, q).encode()).hexdigest()[:24]
        return self.directory / f"{h}.tfmc"

    def _lock(self, path: Path):
        self.directory.mkdir(parents=True, exist_ok=True)
        return FileLock(str(path) + ".lock")

    def put(self, model: ChannelModel) -> Path:
        es = model.eigensystem
        t = es.table
        q = (t.N, t.M, t.L)
        arrays = {"roots": es.roots, "wavenumbers": es.wavenumbers, "axial_uni": model.K_uni.axial, "axial_par": model.K_par.axial}
        for n in range(t.N + 1):
            arrays[f"uni_{n}"] = model.K_uni.radial[n]
            arrays[f"par_{n}"] = model.K_par.radial[n]
        meta = {"key": cache_key(es.geometry, q), "R0": es.geometry.R0, "Z0": es.geometry.Z0, "q": list(q)}
        blob = _encode(arrays, meta)
        path = self.path(es.geometry, q)
        with self._lock(path):
            fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".tfmc")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(blob)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return path

    def get(self, geometry: CylinderGeometry, q, folded=True):
        """Cached model or ``None``; unreadable entries count as absent."""
        path = self.path(geometry, q)
        if not path.exists():
            return None
        with self._lock(path):
            try:
                blob = path.read_bytes()
            except FileNotFoundError:
                return None
        try:
            meta, arr = _decode(blob)
        except (CacheError, ValueError, KeyError) as exc:
            log.warning("ignoring cache entry %s: %s", path, exc)
            return None
        if meta.get("key") != cache_key(geometry, q):
            log.warning("ignoring cache entry %s: key mismatch", path)
            return None
        N, M, L = q
        table = ModeTable(N, M, L, folded=folded)
        es = EigenSystem(geometry, table, arr["roots"], arr["wavenumbers"])
        K_uni = FeedbackMatrices("uni", table, tuple(arr[f"uni_{n}"] for n in range(N + 1)), arr["axial_uni"])
        K_par = FeedbackMatrices("par", table, tuple(arr[f"par_{n}"] for n in range(N + 1)), arr["axial_par"])
        return ChannelModel(es, K_uni, K_par)

    def invalidate(self, geometry, q) -> bool:
        path = self.path(geometry, q)
        with self._lock(path):
            try:
                path.unlink()
                return True
            except FileNotFoundError:
                return False

    def get_or_build(self, geometry, q, folded=True):
        """``(model, hit)``; a miss builds the model and stores it."""
        model = self.get(geometry, q, folded=folded)
        if model is not None:
            return model, True
        model = ChannelModel.build(geometry, q, folded=folded)
        self.put(model)
        return model, False
