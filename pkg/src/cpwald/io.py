"""Series ingestion, result serialization and run configuration."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io as _io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .farima import SeriesBuffer

SCHEMA = "cp-wald/1"
MAX_ROWS = 10**8


class ParseError(ValueError):
    """A row that is not a finite number; ``line`` is 1-based."""

    def __init__(self, path, line: int, text: str):
        self.path, self.line, self.text = str(path), line, text
        super().__init__(f"{path}:{line}: cannot parse {text!r} as a finite number")


class EmptyFile(ValueError):
    """No numeric rows."""


def ingest(path, max_rows: int = MAX_ROWS) -> SeriesBuffer:
    """Read a one-column numeric file.

    The first line may be a non-numeric header; every other non-final line
    must hold one finite number.  Provenance records the SHA-256 of the bytes.
    """
    path = Path(path)
    raw = path.read_bytes()
    lines = raw.decode("utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    vals = []
    header = None
    for i, text in enumerate(lines, start=1):
        s = text.strip()
        try:
            v = float(s)
        except ValueError:
            if i == 1:
                header = s
                continue
            raise ParseError(path, i, text) from None
        if not math.isfinite(v):
            raise ParseError(path, i, text)
        vals.append(v)
        if len(vals) > max_rows:
            raise ValueError(f"{path}: more than {max_rows} rows")
    if not vals:
        raise EmptyFile(f"{path}: no numeric rows")
    prov = {"source": str(path), "sha256": hashlib.sha256(raw).hexdigest(), "rows": len(vals), "header": header}
    return SeriesBuffer(np.array(vals), None, prov)


def fmt_float(v) -> str:
    """Shortest round-trip decimal form (at most 17 significant digits)."""
    if v is None or v == "":
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def to_json(payload: dict) -> str:
    """Canonical JSON with the schema tag, sorted keys and round-trip floats."""
    body = {"schema": SCHEMA, **_jsonable(payload)}
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=True) + "\n"


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt_float(v) for v in r])
    return buf.getvalue()


def scan_table(result) -> tuple[list[str], list[list]]:
    """Per-split rows ``k, tau, W, lambda_left..., lambda_right..., degenerate``."""
    names = result.param_names or tuple(f"lam{i}" for i in range(result.lam_left.shape[1]))
    header = ["k", "tau", "W"] + [f"{p}_left" for p in names] + [f"{p}_right" for p in names] + ["degenerate"]
    rows = []
    for j, k in enumerate(result.k):
        rows.append(
            [int(k), k / result.n, result.W[j]]
            + list(result.lam_left[j])
            + list(result.lam_right[j])
            + [bool(result.degenerate[j])]
        )
    return header, rows


def render(result, fmt: str = "json") -> str:
    """Deterministic text form of a result object or plain dict."""
    from .mc import McReport, NullDistribution, table1_rows
    from .scan import ScanResult

    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be json or csv, got {fmt!r}")
    if isinstance(result, ScanResult):
        return to_json(result.summary()) if fmt == "json" else to_csv(*scan_table(result))
    if isinstance(result, list) and result and isinstance(result[0], McReport):
        if fmt == "csv":
            return to_csv(*table1_rows(result))
        return to_json({"table": [r.to_dict() for r in result]})
    if isinstance(result, McReport):
        return to_json(result.to_dict()) if fmt == "json" else to_csv(*table1_rows([result]))
    if isinstance(result, NullDistribution):
        if fmt == "csv":
            return to_csv(["w_hat", "ecdf"], [[a, b] for a, b in zip(result.sample, result.ecdf)])
        return to_json(result.to_dict())
    if isinstance(result, dict):
        if fmt == "csv":
            keys = sorted(result)
            return to_csv(keys, [[result[k] for k in keys]])
        return to_json(result)
    raise TypeError(f"cannot render {type(result).__name__}")


def emit(result, fmt: str = "json", dest=None) -> None:
    """Write ``render(result, fmt)`` to a path, a text stream, or stdout (``None`` or ``"-"``)."""
    text = render(result, fmt)
    if dest is None or dest == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    elif hasattr(dest, "write"):
        dest.write(text)
    else:
        p = Path(dest)
        try:
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc


# Configuration ---------------------------------------------------------------

SECTION_KEYS: dict[str, tuple[str, ...]] = {
    "model": ("model", "p", "q", "d-lower", "d-upper", "demean"),
    "scan": ("trim", "stride", "alpha"),
    "mc": ("reps", "levels", "seed", "workers", "n", "d0", "alt-d", "taus", "mode", "family", "df"),
    "io": ("input", "output", "format"),
    "ned": ("generator", "phi", "mu", "gm-n", "gm-reps"),
}


class ConfigError(ValueError):
    """Unknown section or key in a run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Flat ``key = value`` settings grouped by section, as raw strings."""

    command: str = ""
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for sec, kv in self.sections.items():
            if sec not in SECTION_KEYS:
                raise ConfigError(f"unknown config section [{sec}]")
            for key in kv:
                if key not in SECTION_KEYS[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            clean[sec] = {k: str(v).strip() for k, v in sorted(kv.items())}
        object.__setattr__(self, "sections", dict(sorted(clean.items())))

    @classmethod
    def from_text(cls, text: str, command: str = "") -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        secs = {s: dict(cp.items(s)) for s in cp.sections()}
        if "run" in secs:
            command = command or secs.pop("run").get("command", "")
        return cls(command, secs)

    @classmethod
    def from_file(cls, path, command: str = "") -> RunConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"), command)

    def to_text(self) -> str:
        """Canonical form: sorted sections and keys."""
        out = []
        if self.command:
            out.append(f"[run]\ncommand = {self.command}\n")
        for sec, kv in self.sections.items():
            out.append(f"[{sec}]\n" + "".join(f"{k} = {v}\n" for k, v in kv.items()))
        return "\n".join(out)

    def flat(self) -> dict[str, str]:
        """``{dest: value}`` with dashes mapped to underscores, as argparse names them."""
        return {k.replace("-", "_"): v for kv in self.sections.values() for k, v in kv.items()}
