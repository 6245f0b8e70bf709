"""Line-delimited JSON run reports and the console summary."""

from __future__ import annotations

import json
import platform
from dataclasses import dataclass, field

SCHEMA = "infmax.report/1"


@dataclass
class Report:
    command: str
    params: dict
    seed: int
    records: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def add(self, kind: str, **data) -> dict:
        rec = {"type": kind, **data}
        self.records.append(rec)
        return rec

    def lines(self):
        from . import __version__
        yield {"type": "header", "schema": SCHEMA, "version": __version__, "command": self.command,
               "params": self.params, "seed": self.seed, "python": platform.python_version()}
        yield from self.records
        if self.timing:
            yield {"type": "timing", **self.timing}

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.lines():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def summary(self) -> str:
        rows = [("command", self.command), ("seed", str(self.seed))]
        for rec in self.records:
            if rec["type"] != "result":
                continue
            for key, val in rec.items():
                if key == "type":
                    continue
                rows.append((key, _fmt(val)))
        for key, val in self.timing.items():
            rows.append((key, _fmt(val)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _fmt(val) -> str:
    if isinstance(val, float):
        return f"{val:.6g}"
    if isinstance(val, (list, tuple)):
        return json.dumps(val)
    return str(val)


def read_report(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        recs = [json.loads(line) for line in fh if line.strip()]
    if not recs or recs[0].get("schema") != SCHEMA:
        raise ValueError(f"{path} is not an {SCHEMA} report")
    return recs
