"""IP-XACT register-map flow.

Two inputs: an IP-XACT document (only the ``memoryMaps`` subtree is read)
and a line-oriented attribute map tying register fields to reference-model
attribute names.  The output is a versioned text bundle with three sections:

``[regmodel]``
    the canonical register map (blocks by base, registers by offset,
    fields by lsb);
``[covskel]``
    one coverpoint per read-write field, with automatic bins;
``[binding]``
    ``attribute = block.REG.FIELD`` lines from the attribute map.

The last line, ``[end] sha256=<hex>``, covers everything above it, so a
truncated or edited bundle is rejected on load.
"""

from __future__ import annotations

import hashlib
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .regmodel import REG_WIDTH, FieldDef, RegisterDef, RegisterModel, RegModelError

log = logging.getLogger(__name__)

BUNDLE_HEADER = "vfab-bundle v1"
SECTIONS = ("regmodel", "covskel", "binding")

KNOWN_ELEMENTS = {
    "component", "vendor", "library", "name", "version", "description", "displayName",
    "memoryMaps", "memoryMap", "addressBlock", "baseAddress", "range", "width", "usage",
    "register", "addressOffset", "size", "access", "reset", "resets", "value", "mask",
    "field", "bitOffset", "bitWidth", "modifiedWriteValue", "volatile", "typeIdentifier",
}

_ACCESS = {
    "read-write": "RW",
    "read-only": "RO",
    "write-only": "WO",
    "rw": "RW",
    "ro": "RO",
    "wo": "WO",
    "w1c": "W1C",
}


class IpxactError(Exception):
    pass


class XmlParseError(IpxactError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnsupportedWidthError(IpxactError):
    pass


class SemanticError(IpxactError):
    pass


class AttrMapError(IpxactError):
    pass


class ValidationError(IpxactError):
    pass


class BundleError(IpxactError):
    pass


@dataclass(frozen=True)
class BlockIR:
    name: str
    base_offset: int
    range: int
    registers: tuple


@dataclass(frozen=True)
class RegisterMapIR:
    component: str
    blocks: tuple

    def register_count(self):
        return sum(len(b.registers) for b in self.blocks)

    def field_paths(self):
        for b in self.blocks:
            for r in b.registers:
                for f in r.fields:
                    yield f"{b.name}.{r.name}.{f.name}", f

    def resolve(self, path):
        """Return the FieldDef or RegisterDef named by a dot path, else None."""
        parts = path.split(".")
        if len(parts) not in (2, 3):
            return None
        for b in self.blocks:
            if b.name != parts[0]:
                continue
            for r in b.registers:
                if r.name != parts[1]:
                    continue
                if len(parts) == 2:
                    return r
                for f in r.fields:
                    if f.name == parts[2]:
                        return f
        return None


def parse_int(text, what="value"):
    s = (text or "").strip().replace("_", "")
    try:
        if s.lower().startswith("0x"):
            return int(s, 16)
        m = re.fullmatch(r"(?:\d+)?'([hHdDbBoO])([0-9a-fA-F]+)", s)
        if m:
            return int(m.group(2), {"h": 16, "d": 10, "b": 2, "o": 8}[m.group(1).lower()])
        return int(s, 10)
    except ValueError:
        raise SemanticError(f"cannot parse {what} {text!r} as an integer") from None


def _local(tag):
    if not isinstance(tag, str):
        return ""
    if "}" in tag:
        tag = tag.rsplit("}", 1)[1]
    return tag.rsplit(":", 1)[-1]


def _child(elem, name):
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _children(elem, name):
    return [c for c in elem if _local(c.tag) == name]


def _text(elem, name, required_in=None):
    c = _child(elem, name)
    if c is None or c.text is None or not c.text.strip():
        if required_in is not None:
            raise SemanticError(f"{required_in}: missing <{name}>")
        return None
    return c.text.strip()


def _access(text, where):
    if text is None:
        return None
    acc = _ACCESS.get(text.strip().lower())
    if acc is None:
        raise SemanticError(f"{where}: unsupported access {text!r}")
    return acc


def parse_ipxact(xml_text, warnings=None):
    """Parse the supported IP-XACT subset into a canonical :class:`RegisterMapIR`."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlParseError(str(exc), exc.position[0] if exc.position else None) from None

    unknown = sorted({_local(e.tag) for e in root.iter()} - KNOWN_ELEMENTS - {""})
    for tag in unknown:
        msg = f"ignoring unsupported element <{tag}>"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)

    component = _text(root, "name") or _local(root.tag)
    blocks = []
    for mmap in (e for e in root.iter() if _local(e.tag) == "memoryMap"):
        for blk in _children(mmap, "addressBlock"):
            blocks.append(_parse_block(blk))
    names = [b.name for b in blocks]
    if len(set(names)) != len(names):
        raise SemanticError(f"duplicate addressBlock names in {names}")
    blocks.sort(key=lambda b: (b.base_offset, b.name))
    return RegisterMapIR(component, tuple(blocks))


def _parse_block(blk):
    name = _text(blk, "name", "addressBlock")
    where = f"addressBlock {name}"
    base = parse_int(_text(blk, "baseAddress", where), f"{where} baseAddress")
    rng = parse_int(_text(blk, "range", where), f"{where} range")
    block_access = _access(_text(blk, "access"), where)
    regs = [_parse_register(r, name, rng, block_access) for r in _children(blk, "register")]
    regs.sort(key=lambda r: r.offset)
    for a, b in zip(regs, regs[1:]):
        if b.offset < a.offset + REG_WIDTH // 8:
            raise SemanticError(f"{where}: registers {a.name} and {b.name} overlap "
                                f"(offsets {a.offset:#x} and {b.offset:#x})")
    names = [r.name for r in regs]
    if len(set(names)) != len(names):
        raise SemanticError(f"{where}: duplicate register names")
    return BlockIR(name, base, rng, tuple(regs))


def _parse_register(reg, block_name, block_range, block_access):
    name = _text(reg, "name", f"register in {block_name}")
    where = f"register {block_name}.{name}"
    offset = parse_int(_text(reg, "addressOffset", where), f"{where} addressOffset")
    size = parse_int(_text(reg, "size", where), f"{where} size")
    if size != REG_WIDTH:
        raise UnsupportedWidthError(f"{where}: size {size} unsupported (only {REG_WIDTH})")
    if offset < 0 or offset % 4:
        raise SemanticError(f"{where}: addressOffset {offset:#x} not 4-byte aligned")
    if offset + REG_WIDTH // 8 > block_range:
        raise SemanticError(f"{where}: addressOffset {offset:#x} outside block range {block_range:#x}")
    reg_access = _access(_text(reg, "access"), where) or block_access or "RW"
    reset_elem = _child(reg, "reset")
    reset = 0
    if reset_elem is not None:
        reset = parse_int(_text(reset_elem, "value", f"{where} reset"), f"{where} reset")
    if not 0 <= reset < 1 << REG_WIDTH:
        raise SemanticError(f"{where}: reset {reset:#x} does not fit {REG_WIDTH} bits")

    fields = []
    for f in _children(reg, "field"):
        fname = _text(f, "name", f"field in {where}")
        fwhere = f"{where}.{fname}"
        lsb = parse_int(_text(f, "bitOffset", fwhere), f"{fwhere} bitOffset")
        width = parse_int(_text(f, "bitWidth", fwhere), f"{fwhere} bitWidth")
        if width < 1 or lsb < 0:
            raise SemanticError(f"{fwhere}: bad bit range (bitOffset {lsb}, bitWidth {width})")
        if lsb + width > REG_WIDTH:
            raise SemanticError(f"{fwhere}: bits [{lsb + width - 1}:{lsb}] exceed bit {REG_WIDTH - 1}")
        access = _access(_text(f, "access"), fwhere) or reg_access
        mwv = _text(f, "modifiedWriteValue")
        if mwv is not None:
            if mwv != "oneToClear":
                raise SemanticError(f"{fwhere}: modifiedWriteValue {mwv!r} unsupported")
            access = "W1C"
        freset = (reset >> lsb) & ((1 << width) - 1)
        resets = _child(f, "resets")
        freset_elem = _child(resets, "reset") if resets is not None else _child(f, "reset")
        if freset_elem is not None:
            freset = parse_int(_text(freset_elem, "value", f"{fwhere} reset"), f"{fwhere} reset")
        try:
            fields.append(FieldDef(fname, lsb, width, access, freset))
        except RegModelError as exc:
            raise SemanticError(f"{fwhere}: {exc}") from None
    if not fields:
        fields.append(FieldDef(name, 0, REG_WIDTH, reg_access, reset))
    try:
        return RegisterDef(name, offset, tuple(fields))
    except RegModelError as exc:
        raise SemanticError(f"{where}: {exc}") from None


# -- attribute map -------------------------------------------------------------


@dataclass(frozen=True)
class AttrMap:
    entries: tuple = ()

    def binding(self):
        return {attr: path for path, attr in self.entries}


_ATTR_LINE = re.compile(r"([A-Za-z_]\w*(?:\.[A-Za-z_]\w*){1,2})\s*->\s*([A-Za-z_]\w*)")


def parse_attr_map(text):
    entries = []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ATTR_LINE.fullmatch(line)
        if m is None:
            raise AttrMapError(f"line {lineno}: expected '<block.REG[.FIELD]> -> <attribute>', got {raw.strip()!r}")
        path, attr = m.groups()
        if attr in seen:
            raise AttrMapError(f"line {lineno}: attribute {attr!r} already mapped on line {seen[attr]}")
        seen[attr] = lineno
        entries.append((path, attr))
    return AttrMap(tuple(entries))


@dataclass
class ValidationReport:
    errors: list
    warnings: list

    @property
    def ok(self):
        return not self.errors


def validate_cross(ir, amap):
    errors = []
    for path, attr in amap.entries:
        if ir.resolve(path) is None:
            errors.append(f"attribute {attr!r}: unresolved path {path!r}")
    mapped = {p for p, _ in amap.entries}
    warnings = []
    for path, _ in ir.field_paths():
        reg_path = path.rsplit(".", 1)[0]
        if path not in mapped and reg_path not in mapped:
            warnings.append(f"{path} has no model attribute")
    return ValidationReport(errors, warnings)


# -- coverage skeleton -----------------------------------------------------------


@dataclass(frozen=True)
class CoverpointSpec:
    path: str
    bins: tuple

    def bin_text(self):
        parts = []
        for name, lo, hi in self.bins:
            parts.append(f"{name}={lo}" if lo == hi else f"{name}={lo}..{hi}")
        return " ".join(parts)


def auto_bins(field):
    """Disjoint bins covering a field's value range, anchored on its reset."""
    top = (1 << field.width) - 1
    if field.width == 1:
        return (("zero", 0, 0), ("one", 1, 1))
    r = field.reset
    if r in (0, top):
        mid = top // 2
        return (("zero", 0, 0), ("low", 1, mid), ("high", mid + 1, top - 1), ("max", top, top))
    bins = [("zero", 0, 0)]
    if r > 1:
        bins.append(("low", 1, r - 1))
    bins.append(("reset", r, r))
    bins.append(("high", r + 1, top))
    return tuple(bins)


def coverage_skeleton(ir):
    return tuple(CoverpointSpec(path, auto_bins(f)) for path, f in ir.field_paths() if f.access == "RW")


def parse_bins(text):
    bins = []
    for tok in text.split():
        name, _, rng = tok.partition("=")
        lo, _, hi = rng.partition("..")
        bins.append((name, int(lo, 0), int(hi or lo, 0)))
    return tuple(bins)


# -- bundle ------------------------------------------------------------------------


class LoadedBundle(NamedTuple):
    model: RegisterModel
    covskel: tuple
    binding: dict
    ir: RegisterMapIR


def _render(ir, covskel, binding):
    out = [BUNDLE_HEADER, "[regmodel]", f"component {ir.component}"]
    for b in ir.blocks:
        out.append(f"block {b.name} base={b.base_offset:#x} range={b.range:#x}")
        for r in b.registers:
            out.append(f"  reg {r.name} offset={r.offset:#x}")
            for f in r.fields:
                out.append(f"    field {f.name} lsb={f.lsb} width={f.width} access={f.access} reset={f.reset:#x}")
    out.append("[covskel]")
    for cp in covskel:
        out.append(f"cp {cp.path} {cp.bin_text()}")
    out.append("[binding]")
    for attr in sorted(binding):
        out.append(f"{attr} = {binding[attr]}")
    body = "\n".join(out) + "\n"
    return body + f"[end] sha256={hashlib.sha256(body.encode()).hexdigest()}\n"


def emit_bundle(ir, amap, out=None):
    """Render the bundle text; also write it to ``out`` when given."""
    report = validate_cross(ir, amap)
    if not report.ok:
        raise ValidationError("; ".join(report.errors))
    text = _render(ir, coverage_skeleton(ir), amap.binding())
    if out is not None:
        Path(out).write_text(text)
    return text


_KV = re.compile(r"(\w+)=(\S+)")


def _kv(line, keys, where):
    found = dict(_KV.findall(line))
    missing = [k for k in keys if k not in found]
    if missing:
        raise BundleError(f"{where}: missing {', '.join(missing)} in {line.strip()!r}")
    try:
        return {k: int(found[k], 0) if k != "access" else found[k] for k in keys}
    except ValueError:
        raise BundleError(f"{where}: bad number in {line.strip()!r}") from None


def load_bundle(source, warnings=None):
    """Load bundle text (or a path to it)."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.startswith(BUNDLE_HEADER)
                                   and "\n" not in source):
        try:
            source = Path(source).read_text()
        except (OSError, UnicodeDecodeError) as exc:
            raise BundleError(f"cannot read bundle {str(source)!r}: {exc}") from None
    text = source
    lines = text.splitlines()
    if not lines or lines[0].strip() != BUNDLE_HEADER:
        head = lines[0].strip() if lines else "<empty>"
        raise BundleError(f"unsupported bundle header {head!r} (expected {BUNDLE_HEADER!r})")
    end = [i for i, l in enumerate(lines) if l.startswith("[end]")]
    if not end:
        raise BundleError("bundle is truncated: no [end] line")
    body = "\n".join(lines[:end[0]]) + "\n"
    m = re.fullmatch(r"\[end\] sha256=([0-9a-f]{64})", lines[end[0]].strip())
    if m is None or hashlib.sha256(body.encode()).hexdigest() != m.group(1):
        raise BundleError("bundle checksum mismatch: file is corrupt or was edited")

    sections = {}
    current = None
    for lineno, line in enumerate(lines[1:end[0]], 2):
        s = line.strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            if current in sections:
                raise BundleError(f"line {lineno}: duplicate section [{current}]")
            sections[current] = []
            if current not in SECTIONS:
                msg = f"ignoring unknown bundle section [{current}]"
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
            continue
        if current is None:
            raise BundleError(f"line {lineno}: content outside any section")
        sections[current].append((lineno, line))
    for name in SECTIONS:
        if name not in sections:
            raise BundleError(f"bundle has no [{name}] section")

    ir = _load_regmodel(sections["regmodel"])
    covskel = []
    for lineno, line in sections["covskel"]:
        parts = line.split(None, 2)
        if len(parts) < 3 or parts[0] != "cp":
            raise BundleError(f"line {lineno}: bad coverpoint line {line.strip()!r}")
        try:
            covskel.append(CoverpointSpec(parts[1], parse_bins(parts[2])))
        except ValueError:
            raise BundleError(f"line {lineno}: bad bins {parts[2]!r}") from None
    binding = {}
    for lineno, line in sections["binding"]:
        attr, eq, path = (p.strip() for p in line.partition("="))
        if not eq or not attr or not path:
            raise BundleError(f"line {lineno}: bad binding line {line.strip()!r}")
        binding[attr] = path
    try:
        model = RegisterModel.from_ir(ir)
    except RegModelError as exc:
        raise BundleError(f"corrupt [regmodel] section: {exc}") from None
    return LoadedBundle(model, tuple(covskel), binding, ir)


def _load_regmodel(lines):
    component = None
    blocks = []
    try:
        for lineno, line in lines:
            where = f"line {lineno}"
            words = line.split()
            kind = words[0]
            if kind == "component":
                component = words[1]
            elif kind == "block":
                kv = _kv(line, ("base", "range"), where)
                blocks.append([words[1], kv["base"], kv["range"], []])
            elif kind == "reg":
                kv = _kv(line, ("offset",), where)
                blocks[-1][3].append([words[1], kv["offset"], []])
            elif kind == "field":
                kv = _kv(line, ("lsb", "width", "access", "reset"), where)
                blocks[-1][3][-1][2].append(
                    FieldDef(words[1], kv["lsb"], kv["width"], kv["access"], kv["reset"]))
            else:
                raise BundleError(f"{where}: unknown regmodel entry {kind!r}")
        return RegisterMapIR(component, tuple(
            BlockIR(name, base, rng, tuple(RegisterDef(r, off, tuple(fs)) for r, off, fs in regs))
            for name, base, rng, regs in blocks))
    except (IndexError, RegModelError) as exc:
        raise BundleError(f"corrupt [regmodel] section: {exc}") from None
