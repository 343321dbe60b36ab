"""Report rows: key uniqueness, serialization, table rendering."""

import math

import pytest

from sepfuse.report import EvalReport, ReportRow, make_provenance, read_report_jsonl


def _row(task="asr", snr=0.0, alpha=0.5, **metrics):
    return ReportRow(
        task=task,
        snr_db=snr,
        separator="oracle-irm",
        router="rule",
        alpha=alpha,
        metrics=metrics or {"mean_wer": 0.1},
        n_items=3,
    )


def test_duplicate_keys_rejected():
    report = EvalReport(provenance={})
    report.add_row(_row())
    with pytest.raises(ValueError):
        report.add_row(_row())
    report.add_row(_row(snr=5.0))  # different key is fine


def test_jsonl_round_trip(tmp_path):
    report = EvalReport(provenance=make_provenance("abc123", seed=7))
    report.add_row(_row(snr=10.0, mean_wer=0.2, hallucination_rate=0.0))
    report.add_row(_row(snr=math.inf, mean_wer=0.05, hallucination_rate=0.0))
    report.add_row(_row(snr=0.0, mean_wer=math.nan, hallucination_rate=1.0))
    path = tmp_path / "r.jsonl"
    report.write_jsonl(path)
    back = read_report_jsonl(path)
    assert back.provenance["config_hash"] == "abc123"
    assert back.provenance["seed"] == 7
    assert len(back.rows) == 3
    by_snr = {r.snr_db: r for r in back.rows}
    assert by_snr[math.inf].metrics["mean_wer"] == 0.05
    assert math.isnan(by_snr[0.0].metrics["mean_wer"])  # NaN -> null -> NaN


def test_render_text_layout():
    report = EvalReport(provenance={})
    for snr in (10.0, 0.0, -10.0):
        for alpha in (0.0, 0.5):
            report.add_row(_row(snr=snr, alpha=alpha, sdr_mean=snr + alpha))
    text = report.render_text()
    assert "[asr] sdr_mean" in text
    assert "10 dB" in text
    assert "-10 dB" in text
    header = next(l for l in text.splitlines() if "condition" in l)
    # SNR columns ordered high to low
    assert header.index("10 dB") < header.index("0 dB") < header.index("-10 dB")
    assert "a=0.5" in text


def test_provenance_records_versions():
    prov = make_provenance("deadbeef", seed=3, extra={"note": "x"})
    assert prov["config_hash"] == "deadbeef"
    assert prov["seed"] == 3
    assert "numpy" in prov
    assert "scipy" in prov
    assert prov["package_version"]
    assert prov["note"] == "x"
