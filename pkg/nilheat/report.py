"""
Report serialisation: the JSON verification report with its lock hash, the
stdout summary and the delimited tables written by dump-kernel, decompose and eval.

JSON is written with sorted keys and no timings unless they were asked for, so two
runs with the same configuration produce the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .config import RunConfig
from .constants import manifest

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NONCONVERGENT = 3


def jsonable(value: Any) -> Any:
    """Plain JSON data: complex -> {"re", "im"}, numpy scalars and arrays unwrapped."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _finite(float(value.real)), "im": _finite(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _finite(float(value))
    return value


def _finite(x: float) -> Union[float, str]:
    return x if math.isfinite(x) else repr(x)


@dataclass
class CheckResult:
    check_id: str
    reference: str
    computed: Any
    expected: Any
    tolerance: float
    mode: str
    passed: bool
    runtime_ms: int
    tail_bound: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    error: Optional[str] = None
    nonconvergent: bool = False
    ref: Optional[str] = None

    def to_record(self, timings: bool = False) -> Dict[str, Any]:
        rec = {
            "check_id": self.check_id,
            "ref": self.ref,
            "reference": self.reference,
            "computed": jsonable(self.computed),
            "expected": jsonable(self.expected),
            "tolerance": jsonable(self.tolerance),
            "mode": self.mode,
            "passed": self.passed,
            "tail_bound": jsonable(self.tail_bound),
            "detail": jsonable(self.detail),
            "warnings": list(self.warnings),
        }
        if self.error is not None:
            rec["error"] = self.error
        if timings:
            rec["runtime_ms"] = self.runtime_ms
        return rec


@dataclass
class VerificationReport:
    config: RunConfig
    results: List[CheckResult]

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def exit_code(self) -> int:
        if any(r.nonconvergent for r in self.results):
            return EXIT_NONCONVERGENT
        return EXIT_OK if self.passed else EXIT_FAILED

    def to_dict(self) -> Dict[str, Any]:
        cfg = self.config
        return {
            "config": jsonable(cfg.to_dict()),
            "constants": jsonable(manifest(cfg.n, cfg.t, cfg.k)),
            "checks": [r.to_record(cfg.timings) for r in self.results],
            "summary": {
                "total": len(self.results),
                "passed": len(self.results) - len(self.failures),
                "failed": [r.check_id for r in self.failures],
            },
        }

    def lock_hash(self) -> str:
        body = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(body.encode("utf-8")).hexdigest()

    def to_json(self) -> str:
        payload = self.to_dict()
        payload["lock_hash"] = self.lock_hash()
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_json(), encoding="utf-8")
        return p

    def summary_table(self) -> str:
        width = max([len(r.check_id) for r in self.results] + [8])
        lines = [f"{'check'.ljust(width)}  {'ref':<22}  status  computed      expected      tolerance"]
        for r in self.results:
            status = "ok" if r.passed else ("NONCONV" if r.nonconvergent else "FAIL")
            line = f"{r.check_id.ljust(width)}  {r.ref or '-':<22}  {status:<6}  {_short(r.computed):<12}  {_short(r.expected):<12}  {_short(r.tolerance)}"
            if self.config.timings:
                line += f"  {r.runtime_ms} ms"
            if r.error:
                line += f"  [{r.error}]"
            lines.append(line)
        lines.append(f"{len(self.results) - len(self.failures)}/{len(self.results)} checks passed")
        return "\n".join(lines)


def _short(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    if isinstance(value, (complex, np.complexfloating)) and value.imag:
        return f"{value.real:.3e}{value.imag:+.1e}i"
    return f"{float(abs(value) if isinstance(value, complex) else value):.4e}"


# ----------------------------- Delimited tables ----------------------------- #

def complex_columns(name: str, values: np.ndarray) -> Dict[str, np.ndarray]:
    """A complex column as a (name_re, name_im) pair."""
    arr = np.asarray(values)
    return {f"{name}_re": np.real(arr).reshape(-1), f"{name}_im": np.imag(arr).reshape(-1)}


def write_table(
    stream: IO[str],
    columns: Dict[str, Sequence[Any]],
    constants: Optional[Dict[str, Any]] = None,
    comments: Iterable[str] = (),
) -> None:
    """Comma-separated table: '#' lines for the constants manifest, one header row, then rows."""
    for line in comments:
        stream.write(f"# {line}\n")
    for key, entry in sorted((constants or {}).items()):
        stream.write(f"# {key} = {json.dumps(jsonable(entry), sort_keys=True)}\n")
    names = list(columns)
    data = [list(columns[c]) for c in names]
    rows = len(data[0]) if data else 0
    if any(len(col) != rows for col in data):
        raise ValueError("table columns have different lengths")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(names)
    for i in range(rows):
        writer.writerow([_cell(col[i]) for col in data])


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def table_text(columns: Dict[str, Sequence[Any]], constants: Optional[Dict[str, Any]] = None, comments: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    write_table(buf, columns, constants, comments)
    return buf.getvalue()
