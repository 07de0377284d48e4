"""Bit-exact round-trips through the AFTX1 tensor container."""

import numpy as np
import pytest

from aftx.container import (
    entries_digest,
    load_container,
    load_sidecar,
    save_container,
)
from aftx.errors import FormatError


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    entries = [
        ("encoder.mha.q_proj.weight", rng.standard_normal((8, 8)), True),
        ("encoder.mha.q_proj.bias", rng.standard_normal(8), True),
        ("conv.0.weight", rng.standard_normal((4, 1, 3)), False),
        ("scalar", np.array(3.25), True),
    ]
    path = tmp_path / "params.aftx"
    save_container(path, entries)
    loaded = load_container(path)
    assert [e[0] for e in loaded] == [e[0] for e in entries]
    for (name, arr, tr), (name2, arr2, tr2) in zip(entries, loaded):
        assert name == name2 and tr == tr2
        assert arr.shape == arr2.shape
        assert arr.tobytes() == arr2.tobytes()


def test_magic_is_aftx1(tmp_path):
    path = tmp_path / "x.aftx"
    save_container(path, [("a", np.zeros(2), True)])
    assert path.read_bytes()[:5] == b"AFTX1"


def test_sidecar_round_trip(tmp_path):
    path = tmp_path / "spec.aftx"
    save_container(path, [("values", np.ones((3, 4)), False)],
                   sidecar={"clip_id": "c001", "kind": "frequency", "seed": 7})
    meta = load_sidecar(path)
    assert meta == {"clip_id": "c001", "kind": "frequency", "seed": 7}


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.aftx"
    path.write_bytes(b"WRONG" + b"\x00" * 16)
    with pytest.raises(FormatError):
        load_container(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "trunc.aftx"
    save_container(path, [("a", np.arange(16.0), True)])
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(FormatError):
        load_container(path)


def test_digest_stable_and_order_independent():
    rng = np.random.default_rng(1)
    a = ("alpha", rng.standard_normal(4), True)
    b = ("beta", rng.standard_normal(3), False)
    assert entries_digest([a, b]) == entries_digest([b, a])
    # any bit flip changes the digest
    mutated = ("alpha", a[1].copy(), True)
    mutated[1][0] += 1e-12
    assert entries_digest([mutated, b]) != entries_digest([a, b])
