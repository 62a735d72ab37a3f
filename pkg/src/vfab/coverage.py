"""Functional coverage: coverpoints with named bins, crosses and reports.

A group counts as covered to the degree that its bins (coverpoint bins plus
cross cells) have been hit at least once.  Values outside every bin of a
coverpoint are counted as uncovered samples, so per coverpoint
``sum(hits) + uncovered == samples`` always holds.
"""

from __future__ import annotations

from dataclasses import dataclass


class CoverageError(Exception):
    pass


@dataclass(frozen=True)
class Bin:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise CoverageError(f"bin {self.name}: empty range [{self.lo}..{self.hi}]")

    def __contains__(self, value):
        return self.lo <= value <= self.hi

    def __str__(self):
        return f"{self.name}=[{self.lo}]" if self.lo == self.hi else f"{self.name}=[{self.lo}..{self.hi}]"


def _as_bin(spec):
    if isinstance(spec, Bin):
        return spec
    name, lo, *rest = spec
    return Bin(name, lo, rest[0] if rest else lo)


class CoverPoint:
    def __init__(self, name, bins, expr=None):
        self.name = name
        self.expr = expr or name
        self.bins = tuple(_as_bin(b) for b in bins)
        if not self.bins:
            raise CoverageError(f"coverpoint {name}: no bins")
        names = [b.name for b in self.bins]
        if len(set(names)) != len(names):
            raise CoverageError(f"coverpoint {name}: duplicate bin names")
        ordered = sorted(self.bins, key=lambda b: b.lo)
        for a, b in zip(ordered, ordered[1:]):
            if b.lo <= a.hi:
                raise CoverageError(f"coverpoint {name}: bins {a.name} and {b.name} overlap")
        self.hits = {b.name: 0 for b in self.bins}
        self.uncovered = 0
        self.samples = 0

    def bin_of(self, value):
        for b in self.bins:
            if value in b:
                return b.name
        return None

    def sample(self, value):
        self.samples += 1
        name = self.bin_of(value)
        if name is None:
            self.uncovered += 1
        else:
            self.hits[name] += 1
        return name

    def hit_bins(self):
        return sum(1 for n in self.hits.values() if n)


class Cross:
    def __init__(self, name, a, b):
        self.name = name
        self.a = a
        self.b = b
        self.hits = {(x.name, y.name): 0 for x in a.bins for y in b.bins}

    def record(self, bin_a, bin_b):
        if bin_a is not None and bin_b is not None:
            self.hits[(bin_a, bin_b)] += 1

    def hit_bins(self):
        return sum(1 for n in self.hits.values() if n)


class CoverGroup:
    def __init__(self, name, points=(), crosses=()):
        self.name = name
        self.points = {}
        self.crosses = []
        for p in points:
            self.add_point(p)
        for c in crosses:
            self.add_cross(*c)

    def add_point(self, point):
        if point.name in self.points:
            raise CoverageError(f"group {self.name}: duplicate coverpoint {point.name}")
        self.points[point.name] = point
        return point

    def add_cross(self, a, b, name=None):
        for n in (a, b):
            if n not in self.points:
                raise CoverageError(f"group {self.name}: cross over unknown coverpoint {n}")
        cross = Cross(name or f"{a}_x_{b}", self.points[a], self.points[b])
        self.crosses.append(cross)
        return cross

    def sample(self, values):
        """Sample each coverpoint whose expression is present in ``values``."""
        hit = {}
        for p in self.points.values():
            if p.expr in values:
                hit[p.name] = p.sample(values[p.expr])
        for c in self.crosses:
            if c.a.name in hit and c.b.name in hit:
                c.record(hit[c.a.name], hit[c.b.name])
        return hit

    def total_bins(self):
        return sum(len(p.bins) for p in self.points.values()) + sum(len(c.hits) for c in self.crosses)

    def hit_bins(self):
        return sum(p.hit_bins() for p in self.points.values()) + sum(c.hit_bins() for c in self.crosses)

    def percent(self):
        total = self.total_bins()
        return round(100.0 * self.hit_bins() / total, 2) if total else 0.0


def cov_sample(group, values):
    return group.sample(values)


@dataclass
class CoverageReport:
    percent: dict
    text: str

    def kv_lines(self):
        return [f"coverage.{name}={pct:.1f}" for name, pct in sorted(self.percent.items())]


def cov_report(groups):
    groups = list(groups.values()) if isinstance(groups, dict) else list(groups)
    lines = []
    percent = {}
    for g in sorted(groups, key=lambda g: g.name):
        pct = g.percent()
        percent[g.name] = pct
        lines.append(f"covergroup {g.name}: {pct:.1f}% ({g.hit_bins()}/{g.total_bins()} bins)")
        for p in g.points.values():
            lines.append(f"  coverpoint {p.name}: {p.samples} samples, {p.uncovered} uncovered")
            for b in p.bins:
                lines.append(f"    {str(b):<24} {p.hits[b.name]}")
        for c in g.crosses:
            lines.append(f"  cross {c.name}: {c.hit_bins()}/{len(c.hits)} cells")
            for (x, y), n in c.hits.items():
                lines.append(f"    {x} x {y}: {n}")
    return CoverageReport(percent, "\n".join(lines) + ("\n" if lines else ""))


def group_from_skeleton(name, covskel, expr_of=None):
    """One coverpoint per skeleton entry; ``expr_of(path)`` names the sample key."""
    points = []
    for cp in covskel:
        expr = expr_of(cp.path) if expr_of else cp.path
        points.append(CoverPoint(cp.path, cp.bins, expr))
    return CoverGroup(name, points)
