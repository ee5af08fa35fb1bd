"""Rendering of aggregated metrics into benchmark-style tables.

Columns run EN, ZH, NoiseSilence, Average, each with IRL / FIR / APT.
Numbers are fixed to 3 decimals for display; CSV additionally carries the
full-precision value in a machine column. A metric with no defined value
(IRL without true positives) renders as "-".
"""

from __future__ import annotations

import io
from enum import Enum

from .metrics import (GROUP_ORDER, MacroAverages, MetricBlock, Outcome, OutcomeKind)


class TableFormat(str, Enum):
    CSV = "csv"
    ALIGNED = "aligned"
    MARKDOWN = "markdown"


class ReportError(Exception):
    pass


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def _row_cells(blocks: dict[str, MetricBlock], micro: MetricBlock,
               macro: MacroAverages) -> list[tuple[str, str, float | None]]:
    """(column name, formatted value, raw value) triples for one system row."""
    cells: list[tuple[str, str, float | None]] = []
    for group in GROUP_ORDER:
        block = blocks.get(group)
        for metric in ("IRL", "FIR", "APT"):
            if block is None:
                cells.append((f"{group}_{metric}", "-", None))
                continue
            raw = {"IRL": block.irl_s, "FIR": block.fir, "APT": block.apt_s}[metric]
            cells.append((f"{group}_{metric}", _fmt(raw), raw))
    for label, blk in (("AvgMicro", micro),):
        cells += [(f"{label}_IRL", _fmt(blk.irl_s), blk.irl_s),
                  (f"{label}_FIR", _fmt(blk.fir), blk.fir),
                  (f"{label}_APT", _fmt(blk.apt_s), blk.apt_s)]
    cells += [("AvgMacro_IRL", _fmt(macro.irl_s), macro.irl_s),
              ("AvgMacro_FIR", _fmt(macro.fir), macro.fir),
              ("AvgMacro_APT", _fmt(macro.apt_s), macro.apt_s)]
    return cells


def render_table(rows: dict[str, tuple[dict[str, MetricBlock], MetricBlock, MacroAverages]],
                 fmt: TableFormat = TableFormat.ALIGNED,
                 footnotes: list[str] | None = None) -> str:
    """Render one row per system. ``rows`` maps system name to the
    (group blocks, micro average, macro averages) triple from aggregate()."""
    if not rows:
        raise ReportError("no metric blocks to render")
    rendered = {name: _row_cells(*triple) for name, triple in rows.items()}
    columns = [c for c, _, _ in next(iter(rendered.values()))]

    if fmt is TableFormat.CSV:
        out = io.StringIO()
        header = ["system"] + columns + [f"{c}_raw" for c in columns]
        out.write(",".join(header) + "\n")
        for name, cells in rendered.items():
            raws = [("" if raw is None else repr(raw)) for _, _, raw in cells]
            out.write(",".join([name] + [v for _, v, _ in cells] + raws) + "\n")
        return out.getvalue()

    header = ["system"] + columns
    body = [[name] + [v for _, v, _ in cells] for name, cells in rendered.items()]
    text = _tabulate(header, body, markdown=(fmt is TableFormat.MARKDOWN))
    for note in footnotes or []:
        text += f"# {note}\n"
    return text


def render_fan_table(outcomes: list[Outcome], fmt: TableFormat = TableFormat.ALIGNED) -> str:
    """False-alarm counts and APT split by Silence vs Noise condition."""
    buckets: dict[str, list[Outcome]] = {"Silence": [], "Noise": []}
    for o in outcomes:
        if o.category in buckets:
            buckets[o.category].append(o)

    header = ["condition", "FAN", "APT"]
    body = []
    csv_raw = []
    for condition in ("Silence", "Noise"):
        group = buckets[condition]
        fan = sum(1 for o in group if o.kind is OutcomeKind.FP)
        apt = sum(o.penalty_s for o in group) / len(group) if group else 0.0
        body.append([condition, str(fan), _fmt(apt)])
        csv_raw.append(repr(apt))

    if fmt is TableFormat.CSV:
        out = io.StringIO()
        out.write(",".join(header + ["APT_raw"]) + "\n")
        for row, raw in zip(body, csv_raw):
            out.write(",".join(row + [raw]) + "\n")
        return out.getvalue()
    return _tabulate(header, body, markdown=(fmt is TableFormat.MARKDOWN))


def render_penalty_histogram(outcomes: list[Outcome], bin_width_s: float = 0.5) -> str:
    """Penalty distribution as CSV bins: bin_start, bin_end, count."""
    if bin_width_s <= 0:
        raise ReportError("bin width must be positive")
    counts: dict[int, int] = {}
    for o in outcomes:
        b = int(o.penalty_s / bin_width_s)
        counts[b] = counts.get(b, 0) + 1
    out = io.StringIO()
    out.write("bin_start_s,bin_end_s,count\n")
    for b in sorted(counts):
        out.write(f"{b * bin_width_s},{(b + 1) * bin_width_s},{counts[b]}\n")
    return out.getvalue()


def _tabulate(header: list[str], body: list[list[str]], markdown: bool) -> str:
    widths = [max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i])
              for i in range(len(header))]
    if markdown:
        lines = ["| " + " | ".join(h.ljust(w) for h, w in zip(header, widths)) + " |",
                 "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        lines += ["| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
                  for row in body]
    else:
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
        lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    return "\n".join(lines) + "\n"
