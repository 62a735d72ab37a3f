import sys
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfab.checking import (
    GANC_MODEL, THR_MODEL, ReferenceModelError, check_frame, external_model, ganc_pixel, read_attrs,
    run_reference, snapshot_attributes, thr_pixel, write_attrs,
)
from vfab.demo.bench import GRID_GAINS, GRID_OFFSETS, ganc_grid, run_ip_frames
from vfab.demo.duts import CTRL, THRESH, FaultMode
from vfab.frame import Frame, make_frame
from vfab.ipxact import load_bundle
from vfab.refproc import main as refproc_main
from vfab.seq import Rng


def oracle_ganc(pix, gain, offset_signed):
    """Written independently of the package: 4.4 gain, floor, signed offset, clamp."""
    value = (pix * gain) // 16 + offset_signed
    return min(255, max(0, value))


@pytest.mark.parametrize("gain,offset", list(product(GRID_GAINS, GRID_OFFSETS)))
def test_ganc_pixel_matches_oracle_on_grid(gain, offset):
    for pix in range(256):
        assert ganc_pixel(pix, gain, offset & 0xFF) == oracle_ganc(pix, gain, offset)


def test_cycle_level_ganc_equals_reference_on_grid():
    grid = ganc_grid()
    assert len(grid) == len(GRID_GAINS) * len(GRID_OFFSETS)
    diffs = [(g, o, p) for (g, o), px in grid.items() for p in range(256)
             if px is None or px[p] != oracle_ganc(p, g, o)]
    assert diffs == []


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
def test_ganc_disabled_is_identity_and_thr_is_binary(pix, gain, offset):
    assert ganc_pixel(pix, gain, offset, enable=0) == pix
    assert thr_pixel(pix, gain) in (0, 255)
    assert thr_pixel(pix, gain) == (255 if pix >= gain else 0)


def test_cycle_level_thr_matches_reference():
    frame = Frame(256, 1, range(256))
    out = run_ip_frames("thr", [({CTRL: 1, THRESH: t}, frame) for t in (0, 1, 0x80, 0xFF)])
    for t, f in zip((0, 1, 0x80, 0xFF), out):
        assert f.pixels == tuple(thr_pixel(p, t) for p in range(256))


def test_corrupt_pixel_fault_hits_exactly_one_pixel():
    frame = make_frame(64, 2, "random", Rng(9))
    [out] = run_ip_frames("ganc", [({CTRL: 1}, frame)], FaultMode("corrupt_pixel", 70))
    expected = run_reference(GANC_MODEL, frame, {"gain": 0x10, "offset": 0, "enable": 1})
    rep = check_frame(out, expected)
    assert rep.total == 1 and rep.details[0][:2] == (70 % 64, 70 // 64)


def test_check_frame_reports_first_k_and_geometry():
    exp = Frame(4, 2, [0] * 8)
    act = Frame(4, 2, [0, 1, 0, 1, 1, 1, 1, 1])
    rep = check_frame(act, exp, k=3)
    assert rep.total == 6 and rep.details == ((1, 0, 0, 1), (3, 0, 0, 1), (0, 1, 0, 1))
    assert not rep.ok and rep.summary().startswith("6 mismatching pixel(s)")
    geo = check_frame(Frame(2, 4, [0] * 8), exp)
    assert geo.geometry_error == "geometry 2x4, expected 4x2" and not geo.ok
    assert check_frame(exp, exp).summary() == "match"


def test_attribute_validation():
    frame = Frame(1, 1, [10])
    with pytest.raises(ReferenceModelError, match="missing"):
        run_reference(GANC_MODEL, frame, {"gain": 1})
    with pytest.raises(ReferenceModelError, match="not int"):
        run_reference(THR_MODEL, frame, {"thresh": "high", "enable": 1})


def test_external_reference_matches_in_process():
    frame = make_frame(17, 5, "random", Rng(2))
    attrs = {"gain": 0x18, "offset": 0xFB, "enable": 1}
    assert run_reference(external_model("ganc"), frame, attrs) == run_reference(GANC_MODEL, frame, attrs)


def test_external_reference_failure_is_reported():
    bad = external_model("ganc", [sys.executable, "-c", "import sys; sys.exit(3)"])
    with pytest.raises(ReferenceModelError, match="exited 3"):
        run_reference(bad, Frame(1, 1, [0]), {"gain": 1, "offset": 0, "enable": 1})


def test_refproc_cli(tmp_path):
    from vfab.frame import read_pgm, write_pgm
    src, attrs, dst = tmp_path / "in.pgm", tmp_path / "a.txt", tmp_path / "out.pgm"
    write_pgm(src, Frame(3, 1, [0, 100, 200]))
    write_attrs(attrs, {"thresh": 100, "enable": 1})
    assert read_attrs(attrs) == {"enable": 1, "thresh": 100}
    assert refproc_main(["thr", str(src), str(attrs), str(dst)]) == 0
    assert read_pgm(dst).pixels == (0, 255, 255)
    attrs.write_text("thresh\n")
    assert refproc_main(["thr", str(src), str(attrs), str(dst)]) == 1


def test_snapshot_attributes_from_mirrors():
    from importlib import resources
    bundle = load_bundle(resources.files("vfab") / "data" / "ganc.bundle")
    model = bundle.model
    model.reset()
    model.lookup("ganc.OFFSET").predict_write(0xFB)
    assert snapshot_attributes(bundle.binding, model) == {"gain": 0x10, "offset": 0xFB, "enable": 0}
