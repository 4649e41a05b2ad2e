"""Check that every formula-bearing operation has an equation-map entry.

Method modules list such operations in ``__operations__``.  The equation map
is a Markdown table whose first column holds the fully qualified symbol in
backticks, e.g. ``cpwald.scan.norm_constants``.  A module without
``__operations__`` is plumbing and passes vacuously.
"""

from __future__ import annotations

import importlib
import re
from dataclasses import dataclass
from pathlib import Path

METHOD_MODULES = ("cpwald.farima", "cpwald.models", "cpwald.scan", "cpwald.mc", "cpwald.ned")
DEFAULT_MAP = Path(__file__).resolve().parents[2] / "docs" / "equation_map.md"
_ROW = re.compile(r"^\|\s*`([A-Za-z_][\w.]*)`\s*\|")


@dataclass(frozen=True)
class LintReport:
    required: tuple[str, ...]
    documented: tuple[str, ...]
    missing: tuple[str, ...]
    stale: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.missing and not self.stale

    def lines(self) -> list[str]:
        out = [f"missing entry: {s}" for s in self.missing]
        out += [f"entry without operation: {s}" for s in self.stale]
        out.append(f"doc-lint {'passed' if self.ok else 'FAILED'}: {len(self.required)} operations, {len(self.missing)} missing")
        return out


def required_operations(modules=METHOD_MODULES) -> tuple[str, ...]:
    ops = []
    for name in modules:
        mod = importlib.import_module(name)
        for op in getattr(mod, "__operations__", ()):
            if not callable(getattr(mod, op, None)):
                raise AttributeError(f"{name}.__operations__ lists {op!r}, which is not a callable")
            ops.append(f"{name}.{op}")
    return tuple(ops)


def documented_symbols(text: str) -> tuple[str, ...]:
    return tuple(m.group(1) for line in text.splitlines() if (m := _ROW.match(line.strip())))


def doc_lint(map_path=None, modules=METHOD_MODULES) -> LintReport:
    """Compare ``__operations__`` of ``modules`` with the equation map at ``map_path``."""
    path = Path(map_path) if map_path else DEFAULT_MAP
    if not path.is_file():
        raise FileNotFoundError(f"equation map not found: {path}")
    req = required_operations(modules)
    doc = documented_symbols(path.read_text(encoding="utf-8"))
    prefixes = tuple(m + "." for m in modules)
    missing = tuple(s for s in req if s not in doc)
    stale = tuple(s for s in doc if s.startswith(prefixes) and s not in req)
    return LintReport(req, doc, missing, stale)
