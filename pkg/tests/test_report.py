import xml.etree.ElementTree as ET

import pytest

from radseg.errors import BinMismatch
from radseg.evaluate import EvalReport, MetricsRow
from radseg.report import REFERENCE_ROWS, Run, render_svg, report_csv, report_table


def fake_report(bins, value=0.5, model="MS-UNet1D", stages=1):
    rows = [MetricsRow(s, 10, {m: value for m in ("f1", "dice", "iou")}, {m: 0.1 for m in ("f1", "dice", "iou")},
                       {m: 10 for m in ("f1", "dice", "iou")}) for s in bins]
    return EvalReport(rows, metadata={"model": model, "stages": stages})


TABLE = [-20.0, -15.0, -10.0, -5.0]


def test_single_report_single_row():
    text = report_table([Run.from_report(fake_report(TABLE))], reference=False)
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    assert len(lines) == 2  # header + one model
    assert "IoU@-20" in lines[0] and "50.0" in lines[1]
    assert "threshold 0.5" in text


def test_reference_rows_displayed():
    text = report_table([Run.from_report(fake_report(TABLE))])
    assert "66.0" in text and "78.2" in text
    assert REFERENCE_ROWS[("UNet1D", None)]["iou"][0] == 66.0
    assert REFERENCE_ROWS[("MS-UNet1D", 2)]["iou"][0] == 78.2


def test_bin_mismatch():
    runs = [Run.from_report(fake_report(TABLE)), Run.from_report(fake_report([-20.0, 0.0]))]
    with pytest.raises(BinMismatch):
        report_table(runs)
    with pytest.raises(BinMismatch):
        report_csv(runs)


def test_csv_schema():
    runs = [Run.from_report(fake_report(TABLE, 0.4)), Run.from_report(fake_report(TABLE, 0.6, stages=2))]
    lines = report_csv(runs).splitlines()
    assert lines[0] == "model,stages,metric,snr_db,mean,std,n"
    assert len(lines) == 1 + 2 * 3 * 4
    assert lines[1] == "MS-UNet1D,1,f1,-20,0.4,0.1,10"


def test_svg_two_curves_per_metric():
    runs = [Run.from_report(fake_report(TABLE, 0.4)), Run.from_report(fake_report(TABLE, 0.6, stages=2))]
    root = ET.fromstring(render_svg(runs))
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 2 * 3
    assert len(root.findall(f"{ns}polygon")) == 2 * 3


def test_svg_single_run_is_valid():
    root = ET.fromstring(render_svg([Run.from_report(fake_report([20.0]))]))
    assert root.tag.endswith("svg")
