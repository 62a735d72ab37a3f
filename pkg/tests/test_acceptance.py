"""End-to-end acceptance checks, one group of tests per criterion."""

import pytest

from vfab.checking import ganc_pixel
from vfab.cli import main
from vfab.demo.bench import GRID_GAINS, GRID_OFFSETS, ganc_grid
from vfab.demo.duts import SOC_SUBSYS
from vfab.demo.envs import DATA_DIR
from vfab.demo.harness import run_test
from vfab.demo.tests import GAIN_BINS, ConfigureSeq
from vfab.ipxact import emit_bundle, load_bundle, parse_attr_map, parse_ipxact
from vfab.sw import STATUS_EDGES, Mailbox, apply_op, mailbox_traces


def criterion(n, title):
    return pytest.mark.criterion(n, title)


# 1 ---------------------------------------------------------------------------
C1 = criterion(1, "seeded runs are reproducible and seeds diverge")


@C1
def test_same_seed_same_trace_hash():
    a, b = run_test("smoke_ganc", "ip", 7), run_test("smoke_ganc", "ip", 7)
    assert a.passed and b.passed
    assert a.result.trace_hash == b.result.trace_hash
    assert a.result.end_time == b.result.end_time


@C1
def test_different_seeds_give_different_runs():
    hashes = {run_test("smoke_ganc", "ip", s).result.trace_hash for s in range(1, 11)}
    assert len(hashes) >= 9


# 2 ---------------------------------------------------------------------------
C2 = criterion(2, "built-in register sequences pass and locate register faults")


@C2
def test_builtin_register_sequences_pass():
    out = run_test("reg_builtin_ganc", "ip", 1)
    assert out.passed
    assert set(out.extras) == {"reset_check", "bitbash", "write_read_all"}


@C2
def test_bad_reset_width_names_width_only():
    out = run_test("reg_builtin_ganc", "ip", 1, "bad_reset_width")
    resets = [f for f in out.result.failures if f.code == "reset_check"]
    assert not out.passed and len(resets) == 1
    assert resets[0].message.startswith("ganc.WIDTH reset value mismatch")
    assert resets[0].message.endswith("(fields WIDTH)")


@C2
def test_gain_stuck_bit_names_gain_bit_0():
    out = run_test("reg_builtin_ganc", "ip", 1, "gain_stuck0")
    bitbash = [f for f in out.result.failures if f.code == "bitbash"]
    assert not out.passed and bitbash
    assert all(f.message.startswith("ganc.GAIN.GAIN bit 0:") for f in bitbash)


# 3 ---------------------------------------------------------------------------
C3 = criterion(3, "scoreboard agrees with the DUT and pinpoints corrupted pixels")


@C3
def test_hundred_random_frames_no_mismatch():
    out = run_test("random_frames", "ip", 1)
    assert out.passed and out.mismatches == 0
    assert out.result.metrics["frames_checked"] == 100


@C3
def test_corrupt_pixel_reported_exactly_once():
    out = run_test("smoke_ganc", "ip", 1, "corrupt_pixel:37")
    assert out.mismatches == 1 and out.result.codes() == ["sb_mismatch"]
    report = out.root.env.sb.verdicts[0].report
    assert [(x, y) for x, y, _exp, _got in report.details] == [(37, 0)]


@C3
def test_cycle_model_matches_oracle_on_grid():
    grid = ganc_grid()
    assert len(grid) == len(GRID_GAINS) * len(GRID_OFFSETS)
    for (gain, offset), pixels in grid.items():
        assert list(pixels) == [ganc_pixel(p, gain, offset & 0xFF) for p in range(256)], (gain, offset)


# 4 ---------------------------------------------------------------------------
C4 = criterion(4, "one register sequence object runs unchanged at IP and SoC level")


@C4
def test_name_based_sequence_reuse():
    seq = ConfigureSeq()
    ip = run_test("name_reuse", "ip", 1, options={"sequence": seq})
    soc = run_test("name_reuse", "soc", 1, options={"sequence": seq})
    assert ip.passed and soc.passed
    a, b = ip.extras["trace"], soc.extras["trace"]
    assert len(a) == len(b) == 2 * len(seq.settings)
    for x, y in zip(a, b):
        assert (x.kind, x.wdata, x.rdata, x.resp) == (y.kind, y.wdata, y.rdata, y.resp)
        assert y.addr == x.addr + SOC_SUBSYS


# 5 ---------------------------------------------------------------------------
C5 = criterion(5, "passive block scoreboards catch chain-level faults")


@C5
def test_chain_passes_fault_free():
    out = run_test("chain", "subsys", 1)
    assert out.passed and out.result.metrics["frames_checked"] == 6


@C5
def test_swapped_chain_detected_by_passive_scoreboards():
    out = run_test("chain", "subsys", 1, "swap_chain")
    assert not out.root.env.ip_envs["ganc"].active
    sources = {f.source for f in out.result.failures if f.code == "sb_mismatch"}
    assert "test.env.sb" in sources


@C5
def test_dropped_frame_detected_by_passive_scoreboards():
    out = run_test("chain", "subsys", 1, "drop_frame")
    sources = {(f.source, f.code) for f in out.result.failures}
    assert ("test.env.ganc_env.sb", "sb_leftover") in sources
    assert ("test.env.sb", "sb_leftover") in sources


# 6 ---------------------------------------------------------------------------
C6 = criterion(6, "IP-XACT to bundle generation round-trips and fails loudly")


@C6
@pytest.mark.parametrize("ip", ["ganc", "thr"])
def test_bundle_round_trip_and_golden(ip, tmp_path):
    ir = parse_ipxact((DATA_DIR / f"{ip}.xml").read_text())
    amap = parse_attr_map((DATA_DIR / f"{ip}.map").read_text())
    text = emit_bundle(ir, amap)
    assert text.encode() == (DATA_DIR / f"{ip}.bundle").read_bytes()
    bundle = load_bundle(text)
    assert bundle.ir == ir
    assert main(["gen", "--ipxact", str(DATA_DIR / f"{ip}.xml"), "--attrmap", str(DATA_DIR / f"{ip}.map"),
                 "--out", str(tmp_path / "b")]) == 0


@C6
def test_unresolved_attribute_path_exits_1(tmp_path, capsys):
    amap = tmp_path / "bad.map"
    amap.write_text("ganc.GAIN.GAIN -> gain\nganc.NOPE.X -> offset\n")
    rc = main(["gen", "--ipxact", str(DATA_DIR / "ganc.xml"), "--attrmap", str(amap),
               "--out", str(tmp_path / "b")])
    assert rc == 1 and "ganc.NOPE.X" in capsys.readouterr().err


# 7 ---------------------------------------------------------------------------
C7 = criterion(7, "SoC test program through VRI matches the IP-level virtual sequence")


@C7
def test_soc_program_and_ip_sequence_agree():
    ip = run_test("reuse_soc_vri", "ip", 1)
    soc = run_test("reuse_soc_vri", "soc", 1)
    assert ip.passed and soc.passed and soc.extras["program_status"] == 0
    ip_sb = ip.root.env.sb
    soc_sb = soc.root.env.subsys_env.ip_envs["ganc"].sb
    assert [v.passed for v in ip_sb.verdicts] == [v.passed for v in soc_sb.verdicts] == [True]
    assert ip_sb.verdicts[0].attrs == soc_sb.verdicts[0].attrs
    ip_in = ip.root.env.vsp.monitor.collected["in"]
    soc_in = soc.root.env.vsp.monitor.collected["in"]
    assert [o.frame for o in ip_in] == [o.frame for o in soc_in]


@C7
def test_mailbox_state_graph_exhaustive():
    for n in range(7):
        for trace in mailbox_traces(n):
            box = Mailbox()
            for op in trace:
                apply_op(box, op)
            assert all(edge in STATUS_EDGES for edge in zip(box.history, box.history[1:])), trace


# 8 ---------------------------------------------------------------------------
C8 = criterion(8, "GSA randomized calls stay in domain and close gain coverage")


def _identity_holds(out):
    group = out.ctx.coverage["gain_cov"]
    return all(sum(cp.hits.values()) + cp.uncovered == cp.samples for cp in group.points.values())


@C8
def test_gsa_twenty_calls_in_domain():
    lo, hi = GAIN_BINS[0][1], GAIN_BINS[-1][2]
    for seed in range(1, 11):
        out = run_test("gsa_gain", "soc", seed)
        records = out.extras["gsa_records"]
        assert out.passed and len(records) == 20
        assert all(lo <= r.params["gain"] <= hi for r in records)
        assert _identity_holds(out)


@C8
def test_gsa_reaches_full_coverage_within_100_calls():
    for seed in range(1, 11):
        out = run_test("gsa_gain", "soc", seed, options={"calls": 100})
        assert out.result.metrics.get("gsa.calls_to_full", 101) <= 100, seed
        assert out.ctx.coverage["gain_cov"].percent() == 100.0
        assert _identity_holds(out)


# 9 ---------------------------------------------------------------------------
C9 = criterion(9, "interrupt checker accepts correct IRQs and flags wrong ones")


@C9
@pytest.mark.parametrize("level", ["ip", "subsys", "soc"])
def test_irq_test_passes(level):
    assert run_test("irq_ganc", level, 1).passed


@C9
def test_spurious_irq_flagged():
    out = run_test("irq_ganc", "ip", 1, "spurious_irq")
    assert "irq_spurious" in out.result.codes()


@C9
def test_dropped_irq_flagged():
    out = run_test("irq_ganc", "ip", 1, "drop_irq")
    assert set(out.result.codes()) == {"irq_missing"}
