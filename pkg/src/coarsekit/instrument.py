"""Cost counters: operator applications, global reductions, dot products, axpys.

A single process-wide tally is kept; scopes record a snapshot at
``scope_begin`` and return the delta at ``scope_end``.  Scopes nest.

    >>> with counting() as c:
    ...     pass
    >>> c.result.matvecs
    0
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import time

from .errors import ScopeError

COUNTER_KEYS = ("matvecs", "fine_matvecs", "reduction_phases", "dot_products", "axpys")


@dataclasses.dataclass
class CounterScope:
    matvecs: int = 0
    fine_matvecs: int = 0
    reduction_phases: int = 0
    dot_products: int = 0
    axpys: int = 0
    wall_time_seconds: float = 0.0

    def counts(self) -> dict:
        return {key: getattr(self, key) for key in COUNTER_KEYS}

    def __sub__(self, other: "CounterScope") -> "CounterScope":
        out = CounterScope(**{k: getattr(self, k) - getattr(other, k) for k in COUNTER_KEYS})
        out.wall_time_seconds = self.wall_time_seconds - other.wall_time_seconds
        return out

    def __add__(self, other: "CounterScope") -> "CounterScope":
        out = CounterScope(**{k: getattr(self, k) + getattr(other, k) for k in COUNTER_KEYS})
        out.wall_time_seconds = self.wall_time_seconds + other.wall_time_seconds
        return out


_TOTAL = CounterScope()
_STACK: list[tuple[CounterScope, float]] = []


def add(matvecs=0, fine_matvecs=0, reduction_phases=0, dot_products=0, axpys=0):
    _TOTAL.matvecs += matvecs
    _TOTAL.fine_matvecs += fine_matvecs
    _TOTAL.reduction_phases += reduction_phases
    _TOTAL.dot_products += dot_products
    _TOTAL.axpys += axpys


def snapshot() -> CounterScope:
    return dataclasses.replace(_TOTAL)


def scope_begin() -> None:
    _STACK.append((snapshot(), time.perf_counter()))


def scope_end() -> CounterScope:
    if not _STACK:
        raise ScopeError("scope_end without matching scope_begin")
    start, t0 = _STACK.pop()
    delta = snapshot() - start
    delta.wall_time_seconds = time.perf_counter() - t0
    return delta


def depth() -> int:
    return len(_STACK)


class _Holder:
    result: CounterScope | None = None


@contextlib.contextmanager
def counting():
    """Context manager form of ``scope_begin``/``scope_end``."""
    holder = _Holder()
    scope_begin()
    try:
        yield holder
    finally:
        holder.result = scope_end()


def _plain(value):
    # numpy scalars and tuples into JSON-native values
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def report_json(scope: CounterScope, *, solver: str, converged: bool, iterations: int,
                restarts: int, final_relative_residual: float, residual_history,
                params: dict, extra: dict | None = None) -> str:
    """Serialize one solve into the report schema with a stable key order."""
    doc = {
        "solver": solver,
        "converged": bool(converged),
        "iterations": int(iterations),
        "restarts": int(restarts),
        "final_relative_residual": float(final_relative_residual),
        "residual_history": [float(r) for r in residual_history],
        "counters": {k: int(getattr(scope, k)) for k in COUNTER_KEYS},
        "wall_time_seconds": float(scope.wall_time_seconds),
        "params": _plain(params),
    }
    if extra:
        doc.update(_plain(extra))
    return json.dumps(doc, indent=2)
