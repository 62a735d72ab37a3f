"""Human-readable and key=value run reports."""

from __future__ import annotations

from pathlib import Path


def kv_lines(outcome):
    r = outcome.result
    lines = [
        f"test={outcome.test}",
        f"level={outcome.level}",
        f"verdict={r.verdict}",
        f"seed={outcome.seed}",
        f"fault={outcome.fault}",
        f"end_time={r.end_time}",
        f"failures={len(r.failures)}",
        f"mismatches={outcome.mismatches}",
    ]
    lines += outcome.coverage.kv_lines()
    lines.append(f"trace_hash={r.trace_hash}")
    return lines


def text_report(outcome):
    r = outcome.result
    out = [f"{outcome.test} @ {outcome.level}  seed={outcome.seed}  fault={outcome.fault}",
           f"verdict: {r.verdict}  (end time {r.end_time})", ""]
    if r.failures:
        out.append(f"failures ({len(r.failures)}):")
        out += [f"  {f}" for f in r.failures]
        out.append("")
    if r.metrics:
        out.append("metrics:")
        out += [f"  {k} = {v}" for k, v in sorted(r.metrics.items())]
        out.append("")
    out.append(outcome.coverage.text.rstrip() or "coverage: none collected")
    out.append(f"trace hash: {r.trace_hash}")
    return "\n".join(out) + "\n"


def report_write(outcome, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.txt").write_text(text_report(outcome))
    (d / "report.kv").write_text("\n".join(kv_lines(outcome)) + "\n")
    return d
