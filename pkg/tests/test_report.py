import csv
import io

import pytest

from sid_harness.manifest import Language
from sid_harness.metrics import (MacroAverages, MetricBlock, Outcome, OutcomeKind, aggregate)
from sid_harness.report import (ReportError, TableFormat, render_fan_table,
                                render_penalty_histogram, render_table)


def block(irl=None, fir=0.0, apt=0.0, n=1):
    return MetricBlock(fir=fir, apt_s=apt, n=n, counts={}, irl_s=irl)


def one_row(irl, fir, apt):
    blocks = {"EN": block(irl, fir, apt)}
    micro = block(irl, fir, apt)
    macro = MacroAverages(irl_s=irl, fir=fir, apt_s=apt)
    return {"sys": (blocks, micro, macro)}


def test_three_decimal_rendering():
    text = render_table(one_row(0.389, 0.124, 0.711), TableFormat.ALIGNED)
    assert "0.389" in text and "0.124" in text and "0.711" in text


def test_missing_irl_rendered_as_dash():
    text = render_table(one_row(None, 0.2, 1.0), TableFormat.ALIGNED)
    row = text.splitlines()[1]
    assert row.split()[1] == "-"  # EN_IRL cell


def test_empty_rows_rejected():
    with pytest.raises(ReportError):
        render_table({}, TableFormat.CSV)


def test_render_deterministic():
    rows = one_row(0.1234567, 0.5, 2.0)
    assert render_table(rows, TableFormat.CSV) == render_table(rows, TableFormat.CSV)


def test_csv_round_trip_preserves_values():
    rows = one_row(0.1234567, 1 / 3, 2.7182818)
    text = render_table(rows, TableFormat.CSV)
    [rec] = list(csv.DictReader(io.StringIO(text)))
    assert rec["EN_IRL"] == "0.123"
    assert float(rec["EN_IRL_raw"]) == 0.1234567  # machine-precision column
    assert float(rec["EN_FIR_raw"]) == 1 / 3


def test_markdown_format():
    text = render_table(one_row(0.1, 0.2, 0.3), TableFormat.MARKDOWN)
    assert text.startswith("| system")
    assert "|---" in text.replace(" ", "").replace("-", "-")


def test_fan_table_counts():
    outcomes = ([Outcome(OutcomeKind.FP, 10.0, f"s{i}", language=Language.NONE,
                         category="Silence") for i in range(10)]
                + [Outcome(OutcomeKind.TN, 0.0, "n0", language=Language.NONE,
                           category="Noise")])
    text = render_fan_table(outcomes)
    lines = text.splitlines()
    assert lines[1].split() == ["Silence", "10", "10.000"]
    assert lines[2].split() == ["Noise", "0", "0.000"]


def test_fan_table_firered_shape():
    outcomes = ([Outcome(OutcomeKind.TN, 0.0, f"s{i}", language=Language.NONE,
                         category="Silence") for i in range(5)]
                + [Outcome(OutcomeKind.FP, 6.0, f"n{i}", language=Language.NONE,
                           category="Noise") for i in range(49)])
    text = render_fan_table(outcomes)
    lines = text.splitlines()
    assert lines[1].split()[:2] == ["Silence", "0"]
    assert lines[2].split()[:2] == ["Noise", "49"]


def test_fan_table_empty_conditions():
    text = render_fan_table([])
    lines = text.splitlines()
    assert lines[1].split() == ["Silence", "0", "0.000"]
    assert lines[2].split() == ["Noise", "0", "0.000"]


def test_penalty_histogram():
    outcomes = [Outcome(OutcomeKind.FP, p, str(i)) for i, p in enumerate([0.1, 0.4, 0.9, 3.2])]
    text = render_penalty_histogram(outcomes, bin_width_s=0.5)
    assert "0.0,0.5,2" in text
    assert "0.5,1.0,1" in text
    assert "3.0,3.5,1" in text


def test_table_from_aggregate_pipeline():
    outcomes = [
        Outcome(OutcomeKind.TP, 0.3, "e1", language=Language.EN, category="InterruptMiddle"),
        Outcome(OutcomeKind.TN, 0.0, "z1", language=Language.ZH, category="Uninterrupted"),
        Outcome(OutcomeKind.FP, 5.0, "n1", language=Language.NONE, category="Noise"),
    ]
    blocks, micro, macro = aggregate(outcomes)
    text = render_table({"demo": (blocks, micro, macro)}, TableFormat.ALIGNED)
    header = text.splitlines()[0].split()
    assert header[1:4] == ["EN_IRL", "EN_FIR", "EN_APT"]
    assert "NoiseSilence_APT" in header
    assert "AvgMicro_APT" in header and "AvgMacro_APT" in header
