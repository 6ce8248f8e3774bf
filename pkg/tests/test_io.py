import struct

import numpy as np
import pytest

from conftest import rand_tt
from randtt import io


def test_binary_roundtrip(rng, tmp_path):
    x = rand_tt(rng, [3, 4, 5], [2, 3])
    p = tmp_path / "x.tt"
    io.save(x, p)
    y = io.load(p)
    assert all(np.array_equal(a, b) for a, b in zip(x.cores, y.cores))


def test_binary_layout(rng):
    x = rand_tt(rng, [2, 3], [2])
    buf = io.dumps(x)
    assert buf[:4] == b"TTR1"
    n, d1, d2, r0, r1, r2 = struct.unpack_from("<6Q", buf, 4)
    assert (n, d1, d2, r0, r1, r2) == (2, 2, 3, 1, 2, 1)
    body = np.frombuffer(buf[4 + 6 * 8:], dtype="<f8")
    assert np.array_equal(body[:4], x.cores[0].ravel())  # C order, last index fastest
    assert np.array_equal(body[4:], x.cores[1].ravel())
    assert len(buf) == 4 + 6 * 8 + 8 * (4 + 6)


def test_binary_errors(rng):
    buf = io.dumps(rand_tt(rng, [2, 3], [2]))
    with pytest.raises(ValueError, match="magic"):
        io.loads(b"XXXX" + buf[4:])
    with pytest.raises(ValueError, match="truncated"):
        io.loads(buf[:-8])
    with pytest.raises(ValueError, match="trailing"):
        io.loads(buf + b"\0" * 8)
    with pytest.raises(ValueError, match="truncated"):
        io.loads(buf[:10])


def test_json_mirror_roundtrip(rng, tmp_path):
    x = rand_tt(rng, [3, 2, 4], [2, 2])
    p = tmp_path / "x.json"
    io.save_json(x, p)
    y = io.load_json(p)
    assert all(np.array_equal(a, b) for a, b in zip(x.cores, y.cores))


def test_json_mirror_errors(rng):
    import json

    doc = json.loads(io.to_json(rand_tt(rng, [2, 2], [1])))
    bad = dict(doc, format="TTR9")
    with pytest.raises(ValueError):
        io.from_json(json.dumps(bad))
    bad = dict(doc, dims=[2, 3])
    with pytest.raises(ValueError):
        io.from_json(json.dumps(bad))
