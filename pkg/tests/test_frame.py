import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfab.frame import Frame, FrameError, make_frame, read_pgm, write_pgm
from vfab.seq import Rng


def test_frame_validation():
    with pytest.raises(FrameError):
        Frame(0, 1, ())
    with pytest.raises(FrameError):
        Frame(2, 2, (1, 2, 3))
    with pytest.raises(FrameError):
        Frame(1, 1, (256,))


def test_patterns():
    r = make_frame(4, 3, "ramp")
    assert r.rows()[2] == (2, 3, 4, 5) and r.at(3, 1) == 4
    assert set(make_frame(3, 3, "const", value=0x1AB).pixels) == {0xAB}
    a = make_frame(8, 8, "random", Rng(4))
    assert a == make_frame(8, 8, "random", Rng(4))
    with pytest.raises(FrameError):
        make_frame(1, 1, "stripes")


def test_equality_ignores_frame_id():
    f = make_frame(2, 2)
    assert f.with_id(9) == f and hash(f.with_id(9)) == hash(f)
    assert f.map(lambda p: 255 - p).pixels == (255, 254, 254, 253)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 1000))
def test_pgm_round_trip(tmp_path_factory, w, h, seed):
    path = tmp_path_factory.mktemp("pgm") / "f.pgm"
    f = make_frame(w, h, "random", Rng(seed))
    write_pgm(path, f)
    assert read_pgm(path) == f


def test_pgm_header_comments_and_errors(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
    assert read_pgm(p).pixels == (1, 2)
    p.write_bytes(b"P2\n2 1\n255\n1 2")
    with pytest.raises(FrameError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 1\n65535\n\x00\x00\x00\x00")
    with pytest.raises(FrameError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(FrameError):
        read_pgm(p)
