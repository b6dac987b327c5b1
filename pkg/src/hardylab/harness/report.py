"""Experiment reports: records, verdicts, provenance and their files on disk.

A record is a JSON object produced by one task. Verdicts are a pure
function of the records and the tolerances, so a stored report can be
re-judged without recomputing anything.
"""

import csv
import datetime
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from hardylab.harness.svg import loglog_svg


def canonical(obj):
    """JSON round trip: tuples become lists, numpy scalars become floats, non-finite become strings."""
    return json.loads(json.dumps(_plain(obj), sort_keys=True))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def number(v):
    """Inverse of the non-finite encoding used by ``canonical``."""
    if isinstance(v, str):
        return float(v)
    return v


def dumps_records(records):
    return json.dumps(records, sort_keys=True, indent=1) + "\n"


@dataclass
class Report:
    report_id: str
    suite: str
    records: list
    verdicts: list
    tolerances: dict
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts)

    def recompute_verdicts(self):
        from hardylab.harness.suites import judge

        return judge(self.suite, self.records, self.tolerances)

    def to_json(self):
        return {
            "report_id": self.report_id,
            "suite": self.suite,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "tolerances": self.tolerances,
            "provenance": self.provenance,
            "records_file": "records.json",
        }

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        meta = json.loads((d / "report.json").read_text())
        records = json.loads((d / "records.json").read_text())
        return cls(meta["report_id"], meta["suite"], records, meta["verdicts"], meta["tolerances"],
                   meta["provenance"])

    def write(self, out):
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "records.json").write_text(dumps_records(self.records))
        (d / "report.json").write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n")
        for rec in self.records:
            name = _slug(rec["task"])
            if "series" in rec:
                (d / f"{name}.csv").write_text(series_csv(rec["series"]))
            if "loglog" in rec:
                ll = rec["loglog"]
                fit = ll.get("fit")
                svg = loglog_svg([number(v) for v in ll["x"]], [number(v) for v in ll["y"]],
                                 title=ll.get("title", rec["task"]), xlabel=ll.get("xlabel", "x"),
                                 ylabel=ll.get("ylabel", "y"), fit=None if fit is None else [number(v) for v in fit])
                (d / f"{name}.svg").write_text(svg)
        return d

    def summary_lines(self):
        out = []
        for v in self.verdicts:
            mark = "PASS" if v["passed"] else "FAIL"
            out.append(f"[{mark}] {v['name']}: {v['detail']}")
        return out


def series_csv(series):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "contribution", "fringe_flag"])
    for lv, c, fr in zip(series["level"], series["contribution"], series["fringe_flag"]):
        w.writerow([lv, repr(number(c)), int(bool(fr))])
    return buf.getvalue()


def _slug(text):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)


def timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
