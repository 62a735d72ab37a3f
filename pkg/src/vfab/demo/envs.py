"""Verification environments for the demo designs at IP, subsystem and SoC level.

The IP environment is written once.  At subsystem and SoC level it is
instantiated again per IP with every agent passive: its monitors, register
predictor, scoreboard and interrupt checker keep working on the IP's own
ports while stimulus comes from the enclosing level.
"""

from __future__ import annotations

from pathlib import Path

from ..checking import MODELS, FrameScoreboard, Stage
from ..coverage import group_from_skeleton
from ..ipxact import load_bundle
from ..regmodel import AddressMap, RegisterBlock, RegisterModel
from ..seq import Sequence
from ..sw import CoreModel, VriCommandTable, VriMailbox, register_vri_handler, vri_register_defs
from ..tb import Component
from ..uvcs.irq import InterruptChecker, InterruptExpectation
from ..uvcs.srb import SrbAdapter, SrbAgent
from ..uvcs.vsp import SendFrameSeq, VspAgent
from .duts import SOC_SUBSYS, SOC_VRI, SUBSYS_GANC, SUBSYS_THR
from .stimulus import PATTERNS, FrameSpec, frame_from_spec, timing_from_seed

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
IRQ_WINDOW = (0, 160)
VRI_SEND_FRAME = 0x01
VRI_ECHO = 0x02


def bundle_path(ip):
    return DATA_DIR / f"{ip}.bundle"


def load_ip_bundles(overrides=None):
    """Shipped bundles keyed by block name; ``overrides`` replace them."""
    bundles = {ip: load_bundle(bundle_path(ip)) for ip in ("ganc", "thr")}
    for b in overrides or ():
        for blk in b.ir.blocks:
            bundles[blk.name] = b
    return bundles


def make_model(bundles, ips, extra=()):
    """One register model holding the named IP blocks plus ``extra`` blocks."""
    model = RegisterModel()
    for ip in ips:
        ir = bundles[ip].ir
        blk = next(b for b in ir.blocks if b.name == ip)
        model.add_block(RegisterBlock(ip, blk.registers))
    for block in extra:
        model.add_block(block)
    model.reset()
    return model


def build_maps(model, level):
    maps = {ip: AddressMap(f"{ip}_ip", 0, auto_predict=False).add_block(model.blocks[ip])
            for ip in ("ganc", "thr") if ip in model.blocks}
    if level == "ip":
        return maps
    sub = AddressMap("subsys", 0, auto_predict=False)
    sub.add_submap(maps["ganc"], SUBSYS_GANC).add_submap(maps["thr"], SUBSYS_THR)
    maps["subsys"] = sub
    if level == "subsys":
        return maps
    vri = AddressMap("vri", 0, auto_predict=False).add_block(model.blocks["vri"])
    soc = AddressMap("soc", SOC_SUBSYS, auto_predict=False)
    soc.add_submap(sub, 0).add_submap(vri, SOC_VRI - SOC_SUBSYS)
    maps["vri"] = vri
    maps["soc"] = soc
    return maps


def report_register_failures(comp, model):
    def on_failure(f):
        comp.error("reg_mirror" if f.kind == "self_check" else "reg_access", str(f))
    model.listeners.append(on_failure)


def geometry_of(model, ip):
    return lambda: (model.field_value(f"{ip}.WIDTH.WIDTH"), model.field_value(f"{ip}.HEIGHT.HEIGHT"))


class IpEnv(Component):
    """Register agent, video agent, interrupt checker, predictor and
    scoreboard for one IP.

    Config: ``ip``, ``ports`` (an ``IpPorts``), ``bundle``, ``is_active``
    and optionally ``regmodel``/``regmap`` supplied by an enclosing level.
    """

    kind = "env"

    def build_phase(self):
        cfg = self.ctx.config
        self.ip = self.get_config("ip", "ganc")
        ports = self.get_config("ports")
        bundle = self.get_config("bundle")
        self.active = bool(self.get_config("is_active", True))
        self.binding = bundle.binding
        self.regmodel = self.get_config("regmodel")
        if self.regmodel is None:
            self.regmodel = make_model({self.ip: bundle}, [self.ip])
            report_register_failures(self, self.regmodel)
        self.regmap = self.get_config("regmap") or build_maps(self.regmodel, "ip")[self.ip]

        self.reg_cov = group_from_skeleton(f"{self.ip}_regs", bundle.covskel)
        self.ctx.coverage[self.reg_cov.name] = self.reg_cov

        p = self.path
        cfg.set(f"{p}.srb", "is_active", self.active)
        cfg.set(f"{p}.srb", "vif", ports.srb)
        cfg.set(f"{p}.vsp", "is_active", self.active)
        cfg.set(f"{p}.vsp", "vif", ports.vin)
        cfg.set(f"{p}.vsp", "out_vif", ports.vout)
        cfg.set(f"{p}.vsp", "geometry", geometry_of(self.regmodel, self.ip))
        cfg.set(f"{p}.irq", "irq", ports.irq)
        model, ip = self.regmodel, self.ip
        cfg.set(f"{p}.irq", "expectation", InterruptExpectation(
            0, lambda: model.field_value(f"{ip}.INT_ENABLE.EN") == 1, IRQ_WINDOW, f"{ip}.frame_done"))
        cfg.set(f"{p}.sb", "stages", [Stage(MODELS[ip], self.binding, model)])

        self.srb = SrbAgent.create("srb", self)
        self.vsp = VspAgent.create("vsp", self)
        self.irq = InterruptChecker.create("irq", self)
        self.sb = FrameScoreboard.create("sb", self)

    def connect_phase(self):
        self.srb.monitor.ap.connect(self.predict)
        mon = self.vsp.monitor
        mon.in_start_ap.connect(self.sb.in_start)
        mon.in_ap.connect(self.sb.in_frame)
        mon.out_ap.connect(self.sb.out_frame)
        # the status bit must be predicted before the checker evaluates it
        mon.out_ap.connect(self.frame_done)
        mon.out_ap.connect(self.irq.trigger)
        if self.active:
            self.regmap.adapter = SrbAdapter(self.srb.sequencer)

    def predict(self, txn):
        if txn.resp != "ok":
            return
        data = txn.wdata if txn.kind == "write" else txn.rdata
        inst = self.regmodel.predict(self.regmap, txn.kind, txn.addr, data)
        if inst is not None and txn.kind == "write":
            self.reg_cov.sample({f"{inst.path}.{f.name}": f.extract(inst.mirror) for f in inst.defn.fields})

    def frame_done(self, obs):
        self.regmodel.lookup(f"{self.ip}.INT_STATUS").predict_field("FRAME_DONE", 1)


class SubsysEnv(Component):
    """Subsystem interfaces plus a passive :class:`IpEnv` per IP and an
    end-to-end scoreboard for the GANC then THR chain."""

    kind = "env"

    def build_phase(self):
        cfg = self.ctx.config
        platform = self.get_config("platform")
        bundles = self.get_config("bundles")
        self.active = bool(self.get_config("is_active", True))
        self.regmodel = self.get_config("regmodel")
        if self.regmodel is None:
            self.regmodel = make_model(bundles, ["ganc", "thr"])
            report_register_failures(self, self.regmodel)
        maps = self.get_config("maps") or build_maps(self.regmodel, "subsys")
        self.regmap = maps["subsys"]
        model = self.regmodel

        p = self.path
        cfg.set(f"{p}.srb", "is_active", self.active)
        cfg.set(f"{p}.srb", "vif", platform.srb if platform.level == "subsys" else platform.sub_srb)
        cfg.set(f"{p}.vsp", "is_active", self.active)
        cfg.set(f"{p}.vsp", "vif", platform.vin)
        cfg.set(f"{p}.vsp", "out_vif", platform.vout)
        cfg.set(f"{p}.vsp", "geometry", geometry_of(model, "ganc"))
        cfg.set(f"{p}.vsp", "out_geometry", geometry_of(model, "thr"))
        cfg.set(f"{p}.sb", "stages", [Stage(MODELS[ip], bundles[ip].binding, model) for ip in ("ganc", "thr")])
        for ip in ("ganc", "thr"):
            env = f"{p}.{ip}_env"
            cfg.set(env, "ip", ip)
            cfg.set(env, "ports", platform.ips[ip])
            cfg.set(env, "bundle", bundles[ip])
            cfg.set(env, "is_active", False)
            cfg.set(env, "regmodel", model)
            cfg.set(env, "regmap", maps[ip])

        self.srb = SrbAgent.create("srb", self)
        self.vsp = VspAgent.create("vsp", self)
        self.ip_envs = {ip: IpEnv.create(f"{ip}_env", self) for ip in ("ganc", "thr")}
        self.sb = FrameScoreboard.create("sb", self)

    def connect_phase(self):
        mon = self.vsp.monitor
        mon.in_start_ap.connect(self.sb.in_start)
        mon.in_ap.connect(self.sb.in_frame)
        mon.out_ap.connect(self.sb.out_frame)
        if self.active:
            self.regmap.adapter = SrbAdapter(self.srb.sequencer)


def send_frame_command(width, height, pattern, seed):
    spec = FrameSpec(width, height, PATTERNS[pattern], seed)
    return SendFrameSeq(frame_from_spec(spec), timing_from_seed(seed), "vri_send_frame")


class _EchoSeq(Sequence):
    def __init__(self, *args):
        super().__init__("vri_echo")
        self.args = args

    def body(self):
        return sum(self.args) & 0xFFFF_FFFF
        yield


def vri_commands():
    table = VriCommandTable()
    register_vri_handler(table, VRI_SEND_FRAME, send_frame_command,
                         schema=[(1, 1024), (1, 1024), (0, len(PATTERNS) - 1), (0, 0xFFFF_FFFF)],
                         name="SEND_FRAME", sequencer="vsp.sequencer")
    register_vri_handler(table, VRI_ECHO, _EchoSeq, schema=[(0, 0xFFFF)] * 2, name="ECHO")
    return table


class SocEnv(Component):
    """SoC level: core (or a register BFM), VRI mailbox, the video interface
    and the whole subsystem environment reused passively.

    Config: ``master`` is ``"core"`` (default) or ``"bfm"``.
    """

    kind = "env"

    def build_phase(self):
        cfg = self.ctx.config
        platform = self.get_config("platform")
        bundles = self.get_config("bundles")
        self.master = self.get_config("master", "core")
        self.regmodel = make_model(bundles, ["ganc", "thr"], [RegisterBlock("vri", vri_register_defs())])
        report_register_failures(self, self.regmodel)
        maps = build_maps(self.regmodel, "soc")
        self.regmap = maps["soc"]
        self.commands = vri_commands()

        p = self.path
        cfg.set(f"{p}.srb", "is_active", self.master == "bfm")
        cfg.set(f"{p}.srb", "vif", platform.srb)
        cfg.set(f"{p}.vsp", "vif", platform.vin)
        cfg.set(f"{p}.vsp", "out_vif", platform.vout)
        cfg.set(f"{p}.vsp", "geometry", geometry_of(self.regmodel, "ganc"))
        cfg.set(f"{p}.vsp", "out_geometry", geometry_of(self.regmodel, "thr"))
        cfg.set(f"{p}.vri", "vif", platform.vri_srb)
        cfg.set(f"{p}.vri", "commands", self.commands)
        cfg.set(f"{p}.vri", "env", self)
        cfg.set(f"{p}.subsys_env", "platform", platform)
        cfg.set(f"{p}.subsys_env", "bundles", bundles)
        cfg.set(f"{p}.subsys_env", "is_active", False)
        cfg.set(f"{p}.subsys_env", "regmodel", self.regmodel)
        cfg.set(f"{p}.subsys_env", "maps", maps)
        core = f"{p}.core"
        cfg.set(core, "vif", platform.srb)
        cfg.set(core, "regmodel", self.regmodel)
        cfg.set(core, "regmap", self.regmap)
        cfg.set(core, "irq_lines", platform.irq_lines)
        cfg.set(core, "symbols", dict(PATTERNS_BY_NAME))
        cfg.set(core, "vri_commands", self.commands.names())
        cfg.set(core, "vri_base", SOC_VRI)

        self.srb = SrbAgent.create("srb", self)
        self.core = CoreModel.create("core", self) if self.master == "core" else None
        self.vsp = VspAgent.create("vsp", self)
        self.vri = VriMailbox.create("vri", self)
        self.subsys_env = SubsysEnv.create("subsys_env", self)

    def connect_phase(self):
        if self.master == "bfm":
            self.regmap.adapter = SrbAdapter(self.srb.sequencer)


PATTERNS_BY_NAME = {name: i for i, name in enumerate(PATTERNS)}

ENV_CLASSES = {"ip": IpEnv, "subsys": SubsysEnv, "soc": SocEnv}
