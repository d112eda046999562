"""Check-record structure shared by the library checks and the CLI report."""

from __future__ import annotations

from fractions import Fraction


def check(name: str, statement: str, ok, **data) -> dict:
    """A single check record; ok=None means the check was skipped."""
    status = "skipped" if ok is None else ("pass" if ok else "fail")
    return {"name": name, "statement": statement, "status": status,
            "data": data}


def passed(records) -> bool:
    return all(r["status"] != "fail" for r in records)


def jsonable(obj):
    """Recursively convert Fractions to exact 'p/q' strings for JSON output."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, str) else k: jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    return obj
