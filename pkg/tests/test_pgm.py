import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from splitseg.errors import FormatError, InvalidParameterError
from splitseg.pgm import quantize, read_pgm, write_pgm


@given(st.integers(1, 65535), st.booleans(), st.data())
def test_integer_roundtrip_exact(maxval, plain, data):
    q = data.draw(arrays(np.int64, (3, 4), elements=st.integers(0, maxval)))
    u = q / maxval
    back = read_pgm(write_pgm(u, maxval, plain))
    assert np.array_equal(back, u)
    assert np.array_equal(quantize(back, maxval), q)


@given(arrays(float, (4, 5), elements=st.floats(0, 1)))
def test_bytes_roundtrip_exact(u):
    raw = write_pgm(u)
    assert write_pgm(read_pgm(raw)) == raw


def test_quantize_half_up():
    assert quantize(np.array([[0.5 / 255, 1.5 / 255, 0.0, 1.0]])).tolist() == [[1, 2, 0, 255]]
    assert quantize(np.array([[0.5]]), maxval=1).tolist() == [[1]]


def test_plain_with_comments():
    raw = b"P2\n# a comment\n3 2 # trailing\n10\n0 5 10\n#mid\n1 2 3\n"
    u = read_pgm(raw)
    assert u.shape == (2, 3)
    assert np.array_equal(u, np.array([[0, 5, 10], [1, 2, 3]]) / 10)


def test_sixteen_bit_big_endian():
    raw = b"P5\n2 1\n1000\n" + bytes([0x03, 0xE8, 0x00, 0x01])
    assert np.array_equal(read_pgm(raw), np.array([[1.0, 0.001]]))


@pytest.mark.parametrize(
    "raw, offset",
    [
        (b"P6\n1 1\n255\n\x00", 0),
        (b"P5\n2 2\n255\n\x00\x00", 13),
        (b"P2\n2 1\n10\n3 11\n", 12),
        (b"P2\n2 x\n10\n", 5),
        (b"P2\n1 1\n70000\n0\n", 7),
        (b"P2\n2 1\n10\n3", 11),
        (b"P2\n0 1\n10\n", 3),
    ],
)
def test_format_errors_report_offsets(raw, offset):
    with pytest.raises(FormatError) as e:
        read_pgm(raw)
    assert e.value.offset == offset


def test_write_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        write_pgm(np.array([[1.2]]))
    with pytest.raises(InvalidParameterError):
        write_pgm(np.array([[0.2]]), maxval=0)
    with pytest.raises(InvalidParameterError):
        write_pgm(np.array([0.2]))
