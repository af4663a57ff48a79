"""Scenario files: flat ``dotted.key = value`` text, one assignment per line.

Values are read as JSON when possible (numbers, ``[1, 2]`` lists, ``true``),
otherwise as bare strings. ``#`` starts a comment. Relative paths are
resolved against the scenario file's directory and stored absolute, so a
scenario echoed with :func:`dumps` parses back to an equal object.

Example::

    kind = system1
    matrices.A = matrices/plant3_A.mat
    matrices.B = matrices/plant3_B.mat
    initial_state = [5, -10, 20]
    initial_gains = [4, 3, 2]
    gain.c = 1
    gain.p = [1, 1.5, 2]
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .errors import ScenarioParseError, ScenarioValidationError

__all__ = [
    "KINDS",
    "SYSTEM_KINDS",
    "NETWORK_KINDS",
    "Scenario",
    "parse_scenario",
    "loads",
    "dumps",
    "from_mapping",
    "to_mapping",
    "with_override",
    "NUMERIC_KEYS",
]

SYSTEM_KINDS = ("system1", "system2", "scalar_gain")
NETWORK_KINDS = ("network_node", "network_edge")
KINDS = ("classify",) + SYSTEM_KINDS + NETWORK_KINDS

MatrixRef = Union[str, tuple]


@dataclass(frozen=True)
class Scenario:
    kind: str
    matrix_a: Optional[MatrixRef] = None
    matrix_b: Optional[MatrixRef] = None
    graph_file: Optional[str] = None
    graph_n: Optional[int] = None
    graph_rho: Optional[float] = None
    graph_seed: Optional[int] = None
    initial_state: Optional[tuple] = None
    initial_state_seed: Optional[int] = None
    initial_state_box: Optional[float] = None
    initial_gains: Optional[tuple] = None
    initial_gains_seed: Optional[int] = None
    initial_gains_range: Optional[tuple] = None
    gain_c: tuple = (1.0,)
    gain_p: tuple = (1.0,)
    oscillator_w: Optional[float] = None
    oscillator_a: Optional[float] = None
    oscillator_b: Optional[float] = None
    oscillator_drive: Optional[str] = None
    dt: float = 1e-3
    horizon: float = 30.0
    output_stride: int = 1
    state_eps: Optional[float] = None
    sync_eps: Optional[float] = None
    hold_time: float = 1.0
    divergence_cap: float = 1e12
    frozen_gains: bool = False
    delta: Optional[float] = None

    @property
    def is_system(self) -> bool:
        return self.kind in SYSTEM_KINDS

    @property
    def is_network(self) -> bool:
        return self.kind in NETWORK_KINDS


# coercers ---------------------------------------------------------------

def _number(v) -> float:
    if isinstance(v, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(v, (int, float)):
        x = float(v)
    elif isinstance(v, str):
        x = float(v)
    else:
        raise ValueError(f"expected a number, got {v!r}")
    if not math.isfinite(x):
        raise ValueError("number must be finite")
    return x


def _integer(v) -> int:
    x = _number(v)
    if x != int(x):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(x)


def _boolean(v) -> bool:
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true or false, got {v!r}")


def _string(v) -> str:
    if isinstance(v, str) and v:
        return v
    raise ValueError(f"expected a string, got {v!r}")


def _vector(v) -> tuple:
    if isinstance(v, (list, tuple)):
        if not v:
            raise ValueError("empty vector")
        return tuple(_number(a) for a in v)
    return (_number(v),)


def _pair(v) -> tuple:
    t = _vector(v)
    if len(t) != 2:
        raise ValueError(f"expected [low, high], got {v!r}")
    return t


def _path(v, base: Optional[Path]) -> str:
    s = _string(v)
    p = Path(s).expanduser()
    if not p.is_absolute() and base is not None:
        p = base / p
    return str(p.resolve()) if base is not None or p.is_absolute() else s


def _matrix(v, base: Optional[Path]) -> MatrixRef:
    if isinstance(v, (list, tuple)):
        rows = tuple(_vector(r) for r in v)
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("inline matrix must be square")
        return rows
    return _path(v, base)


# dotted key -> (attribute, coercer, takes_base_dir)
_SCHEMA: dict[str, tuple[str, Callable, bool]] = {
    "kind": ("kind", _string, False),
    "matrices.A": ("matrix_a", _matrix, True),
    "matrices.B": ("matrix_b", _matrix, True),
    "graph.file": ("graph_file", _path, True),
    "graph.n": ("graph_n", _integer, False),
    "graph.rho": ("graph_rho", _number, False),
    "graph.seed": ("graph_seed", _integer, False),
    "initial_state": ("initial_state", _vector, False),
    "initial_state.seed": ("initial_state_seed", _integer, False),
    "initial_state.box": ("initial_state_box", _number, False),
    "initial_gains": ("initial_gains", _vector, False),
    "initial_gains.seed": ("initial_gains_seed", _integer, False),
    "initial_gains.range": ("initial_gains_range", _pair, False),
    "gain.c": ("gain_c", _vector, False),
    "gain.p": ("gain_p", _vector, False),
    "oscillator.w": ("oscillator_w", _number, False),
    "oscillator.a": ("oscillator_a", _number, False),
    "oscillator.b": ("oscillator_b", _number, False),
    "oscillator.drive": ("oscillator_drive", _string, False),
    "integrator.dt": ("dt", _number, False),
    "integrator.horizon": ("horizon", _number, False),
    "integrator.output_stride": ("output_stride", _integer, False),
    "stop.state_eps": ("state_eps", _number, False),
    "stop.sync_eps": ("sync_eps", _number, False),
    "stop.hold_time": ("hold_time", _number, False),
    "stop.divergence_cap": ("divergence_cap", _number, False),
    "frozen_gains": ("frozen_gains", _boolean, False),
    "delta": ("delta", _number, False),
}
_ATTR_TO_KEY = {attr: key for key, (attr, _, _) in _SCHEMA.items()}

NUMERIC_KEYS = frozenset(
    k for k, (_, fn, _) in _SCHEMA.items() if fn in (_number, _integer, _vector, _pair)
)


def _kind_defaults(kind: str) -> dict:
    if kind in NETWORK_KINDS:
        return {"horizon": 50.0, "hold_time": 2.0, "sync_eps": 1e-4, "gain_p": (1.5,), "oscillator_drive": "sin"}
    if kind in SYSTEM_KINDS:
        return {"horizon": 30.0, "hold_time": 1.0, "state_eps": 1e-8}
    return {}


def _validate(s: Scenario) -> None:
    def fail(msg):
        raise ScenarioValidationError(msg)

    if s.kind not in KINDS:
        fail(f"kind must be one of {', '.join(KINDS)}; got {s.kind!r}")
    if s.dt <= 0:
        fail("integrator.dt must be > 0")
    if s.horizon <= s.dt:
        fail("integrator.horizon must exceed integrator.dt")
    if s.output_stride < 1:
        fail("integrator.output_stride must be >= 1")
    for key, val in (("stop.state_eps", s.state_eps), ("stop.sync_eps", s.sync_eps)):
        if val is not None and val <= 0:
            fail(f"{key} must be > 0")
    if s.hold_time < 0:
        fail("stop.hold_time must be >= 0")
    if s.divergence_cap <= 0:
        fail("stop.divergence_cap must be > 0")
    if s.delta is not None and s.delta <= 0:
        fail("delta must be > 0")
    if any(c <= 0 for c in s.gain_c):
        fail("gain.c entries must be > 0")
    if any(p < 1 for p in s.gain_p):
        fail("gain.p entries must be >= 1")

    if s.initial_state is not None and (s.initial_state_seed is not None or s.initial_state_box is not None):
        fail("give either initial_state or initial_state.seed/box, not both")
    if (s.initial_state_seed is None) != (s.initial_state_box is None):
        fail("initial_state.seed and initial_state.box go together")
    if s.initial_state_box is not None and s.initial_state_box <= 0:
        fail("initial_state.box must be > 0")
    if s.initial_gains is not None and (s.initial_gains_seed is not None or s.initial_gains_range is not None):
        fail("give either initial_gains or initial_gains.seed/range, not both")
    if (s.initial_gains_seed is None) != (s.initial_gains_range is None):
        fail("initial_gains.seed and initial_gains.range go together")
    if s.initial_gains is not None and any(k <= 0 for k in s.initial_gains):
        fail("initial_gains must be positive")
    if s.initial_gains_range is not None:
        lo, hi = s.initial_gains_range
        if not 0 <= lo < hi:
            fail("initial_gains.range must satisfy 0 <= low < high")

    has_state = s.initial_state is not None or s.initial_state_seed is not None
    has_gains = s.initial_gains is not None or s.initial_gains_seed is not None
    if s.kind == "classify":
        if s.matrix_b is None:
            fail("classify needs matrices.B")
    elif s.is_system:
        if s.matrix_a is None or s.matrix_b is None:
            fail(f"{s.kind} needs matrices.A and matrices.B")
        if not has_state:
            fail(f"{s.kind} needs initial_state")
        if not has_gains:
            fail(f"{s.kind} needs initial_gains")
        if s.kind == "scalar_gain" and (len(s.gain_c) != 1 or len(s.gain_p) != 1):
            fail("scalar_gain takes scalar gain.c and gain.p")
    else:
        inline = [s.graph_n, s.graph_rho, s.graph_seed]
        if s.graph_file is not None:
            if any(v is not None for v in inline):
                fail("give either graph.file or graph.n/rho/seed, not both")
        elif any(v is None for v in inline):
            fail(f"{s.kind} needs graph.file or all of graph.n, graph.rho, graph.seed")
        else:
            if s.graph_n < 1:
                fail("graph.n must be >= 1")
            if not 0 < s.graph_rho <= 1:
                fail("graph.rho must lie in (0, 1]")
        if None in (s.oscillator_w, s.oscillator_a, s.oscillator_b):
            fail(f"{s.kind} needs oscillator.w, oscillator.a and oscillator.b")
        if s.oscillator_w == 0:
            fail("oscillator.w must be nonzero")
        if s.oscillator_drive not in ("sin", "cos", "zero"):
            fail("oscillator.drive must be sin, cos or zero")
        if not has_state:
            fail(f"{s.kind} needs initial_state or initial_state.seed/box")
        if not has_gains:
            fail(f"{s.kind} needs initial_gains or initial_gains.seed/range")


def from_mapping(mapping: dict, base_dir: Optional[Path] = None, lines: Optional[dict] = None) -> Scenario:
    """Build and validate a Scenario from raw dotted-key values."""
    lines = lines or {}
    values: dict[str, Any] = {}
    for key, raw in mapping.items():
        if key not in _SCHEMA:
            raise ScenarioParseError("unrecognized key", line=lines.get(key), field=key)
        attr, coerce, wants_base = _SCHEMA[key]
        try:
            values[attr] = coerce(raw, base_dir) if wants_base else coerce(raw)
        except (ValueError, TypeError) as exc:
            raise ScenarioParseError(str(exc), line=lines.get(key), field=key) from None
    if "kind" not in values:
        raise ScenarioParseError("missing required key", field="kind")
    for attr, val in _kind_defaults(values["kind"]).items():
        values.setdefault(attr, val)
    s = Scenario(**values)
    _validate(s)
    return s


def _raw(value):
    if isinstance(value, tuple):
        return [_raw(v) for v in value]
    return value


def to_mapping(s: Scenario) -> dict:
    """Dotted keys for every field that is set, in schema order."""
    out = {}
    attrs = {f.name for f in fields(s)}
    for key, (attr, _, _) in _SCHEMA.items():
        assert attr in attrs
        val = getattr(s, attr)
        if val is not None:
            out[key] = _raw(val)
    return out


def _format(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def dumps(s: Scenario) -> str:
    body = "\n".join(f"{k} = {_format(v)}" for k, v in to_mapping(s).items())
    return body + "\n"


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def loads(text: str, base_dir: Optional[Path] = None) -> Scenario:
    mapping, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if " #" in stripped:
            stripped = stripped.split(" #", 1)[0].rstrip()
        if "=" not in stripped:
            raise ScenarioParseError("expected 'key = value'", line=lineno)
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ScenarioParseError("empty key or value", line=lineno, field=key or None)
        if key in mapping:
            raise ScenarioParseError("duplicate key", line=lineno, field=key)
        mapping[key] = _parse_value(value)
        lines[key] = lineno
    return from_mapping(mapping, base_dir=base_dir, lines=lines)


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    return loads(text, base_dir=path.resolve().parent)


def with_override(s: Scenario, key: str, value) -> Scenario:
    """Copy of ``s`` with one dotted key replaced, re-validated."""
    if key not in _SCHEMA:
        raise ScenarioValidationError(f"unknown parameter {key!r}")
    mapping = to_mapping(s)
    mapping[key] = _raw(value)
    return from_mapping(mapping)


def replace_fields(s: Scenario, **changes) -> Scenario:
    out = replace(s, **changes)
    _validate(out)
    return out
