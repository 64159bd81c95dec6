"""Parameter checkpoints: magic "VCGM", little-endian, Adam moments included
so training is resumable."""

import struct

import numpy as np

from ..errors import DataFormatError
from .optim import ParamStore

MAGIC = b"VCGM"
VERSION = 1


def save_params(path, store):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(store.params)))
        for name, p in store.params.items():
            raw = name.encode()
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", p.values.ndim))
            for d in p.values.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(p.values.astype("<f8").tobytes())
        fh.write(struct.pack("<BQ", 1, store.step_count))
        for name in store.params:
            fh.write(store.m[name].astype("<f8").tobytes())
            fh.write(store.v[name].astype("<f8").tobytes())


def load_params(path):
    store = ParamStore()
    with open(path, "rb") as fh:
        def take(n, what):
            data = fh.read(n)
            if len(data) != n:
                raise DataFormatError(f"truncated while reading {what}",
                                      offset=fh.tell())
            return data

        if take(4, "magic") != MAGIC:
            raise DataFormatError("bad magic; not a checkpoint", offset=0)
        version, count = struct.unpack("<IQ", take(12, "header"))
        if version != VERSION:
            raise DataFormatError(f"unsupported checkpoint version {version}",
                                  offset=4)
        for i in range(count):
            (nlen,) = struct.unpack("<I", take(4, f"param {i} name length"))
            if nlen > 4096:
                raise DataFormatError(f"implausible name length {nlen}",
                                      offset=fh.tell())
            name = take(nlen, f"param {i} name").decode()
            (rank,) = struct.unpack("<I", take(4, f"param {i} rank"))
            if rank > 8:
                raise DataFormatError(f"implausible rank {rank}",
                                      offset=fh.tell())
            shape = tuple(struct.unpack("<Q", take(8, "dim"))[0]
                          for _ in range(rank))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(take(8 * n, f"param {i} data"),
                                 dtype="<f8").reshape(shape)
            store.add(name, data.copy())
        has_moments, step = struct.unpack("<BQ", take(9, "moments flag"))
        if has_moments:
            store.step_count = step
            for name, p in store.params.items():
                n = p.values.size
                store.m[name] = np.frombuffer(
                    take(8 * n, f"{name} moment m"),
                    dtype="<f8").reshape(p.values.shape).copy()
                store.v[name] = np.frombuffer(
                    take(8 * n, f"{name} moment v"),
                    dtype="<f8").reshape(p.values.shape).copy()
        if fh.read(1):
            raise DataFormatError("trailing bytes after checkpoint",
                                  offset=fh.tell() - 1)
    return store
