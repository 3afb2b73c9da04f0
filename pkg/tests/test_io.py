import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from firenet.io import (
    read_complex,
    read_json,
    read_pgm,
    read_real,
    write_complex,
    write_json,
    write_pgm,
    write_real,
)

from conftest import crandn

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(a=arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_real_roundtrip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("io") / "a.bin"
    write_real(p, a)
    assert np.array_equal(read_real(p), a)


def test_complex_roundtrip_and_layout(tmp_path, rng):
    a = crandn(rng, 3, 5)
    write_complex(tmp_path / "c.bin", a)
    raw = (tmp_path / "c.bin").read_bytes()
    assert raw[:4] == b"FNC1"
    assert struct.unpack("<III", raw[4:16]) == (2, 3, 5)
    assert len(raw) == 16 + 16 * a.size
    # interleaved real, imaginary in C order
    assert struct.unpack("<dd", raw[16:32]) == (a[0, 0].real, a[0, 0].imag)
    assert np.array_equal(read_complex(tmp_path / "c.bin"), a)


def test_vector_header(tmp_path):
    write_real(tmp_path / "v.bin", np.arange(4.0))
    raw = (tmp_path / "v.bin").read_bytes()
    assert struct.unpack("<III", raw[4:16]) == (1, 4, 1)
    assert read_real(tmp_path / "v.bin").shape == (4,)


def test_bad_magic_and_size(tmp_path):
    write_real(tmp_path / "r.bin", np.ones(3))
    with pytest.raises(ValueError):
        read_complex(tmp_path / "r.bin")
    raw = (tmp_path / "r.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_real(tmp_path / "short.bin")
    with pytest.raises(ValueError):
        write_real(tmp_path / "x.bin", np.ones((2, 2, 2)))


@pytest.mark.parametrize("bits", [8, 16])
def test_pgm_roundtrip(tmp_path, rng, bits):
    img = rng.uniform(-2.0, 3.0, (7, 9))
    vmin, vmax = write_pgm(tmp_path / "i.pgm", img, bits)
    assert (vmin, vmax) == (img.min(), img.max())
    back = read_pgm(tmp_path / "i.pgm", vmin, vmax)
    assert back.shape == img.shape
    step = (vmax - vmin) / (2**bits - 1)
    assert np.abs(back - img).max() <= 0.5 * step + 1e-12


def test_pgm_raw_values_and_header(tmp_path):
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    write_pgm(tmp_path / "a.pgm", img, 16, 0.0, 1.0)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    # 16-bit samples are big-endian
    assert raw[-8:-6] == b"\x00\x00" and raw[-6:-4] == b"\xff\xff"
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), [[0, 65535], [32768, 16384]])


def test_pgm_comments_and_clipping(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# comment\n3 1\n255\n" + bytes([0, 128, 255]))
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[0, 128, 255]])
    write_pgm(tmp_path / "k.pgm", np.array([[-1.0, 2.0]]), 8, 0.0, 1.0)
    np.testing.assert_array_equal(read_pgm(tmp_path / "k.pgm"), [[0, 255]])


def test_pgm_errors(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "a.pgm", np.ones((2, 2)), 12)
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "a.pgm", np.ones(4))
    (tmp_path / "p2.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "p2.pgm")


def test_constant_image(tmp_path):
    write_pgm(tmp_path / "z.pgm", np.full((2, 3), 4.0))
    np.testing.assert_array_equal(read_pgm(tmp_path / "z.pgm"), np.zeros((2, 3)))


def test_json_sorted(tmp_path):
    write_json(tmp_path / "j.json", {"b": 1, "a": [1.5, None]})
    text = (tmp_path / "j.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(tmp_path / "j.json") == {"a": [1.5, None], "b": 1}
