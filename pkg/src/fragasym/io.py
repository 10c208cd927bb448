"""JSON specifications for kernels, data and experiments; deterministic CSV/JSON writers."""
from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import kernel as kmod
from . import mellin as mmod
from .errors import DomainError

__all__ = [
    "kernel_from_spec",
    "datum_from_spec",
    "load_json",
    "ExperimentConfig",
    "format_float",
    "csv_text",
    "json_text",
    "write_text",
]

KERNEL_FORMS = ("homogeneous", "power", "mitosis", "atoms", "tabulated")
DATUM_FORMS = ("log_gaussian", "two_sided_power", "indicator", "compact_bump", "tabulated")


def load_json(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{p}: invalid JSON ({exc})") from exc


def _spec(obj) -> dict:
    if isinstance(obj, (str, Path)):
        return load_json(obj)
    if not isinstance(obj, dict):
        raise DomainError("specification must be a JSON object or a path")
    return obj


def kernel_from_spec(spec) -> kmod.FragmentationKernel:
    spec = _spec(spec)
    form = spec.get("form")
    params = spec.get("params", {}) or {}
    atoms = [tuple(a) for a in spec.get("atoms", []) or []]
    if form == "homogeneous":
        return kmod.homogeneous()
    if form == "power":
        if "a" not in params:
            raise DomainError("power kernel needs params.a")
        return kmod.power(float(params["a"]), float(params.get("weight", 1.0)))
    if form == "mitosis":
        return kmod.mitosis()
    if form == "atoms":
        if not atoms:
            raise DomainError("atoms kernel needs a nonempty 'atoms' list")
        return kmod.from_atoms(atoms)
    if form == "tabulated":
        grid = spec.get("grid") or {}
        if "z" not in grid or "values" not in grid:
            raise DomainError("tabulated kernel needs grid.z and grid.values")
        return kmod.tabulated(grid["z"], grid["values"], atoms)
    raise DomainError(f"unknown kernel form {form!r}; expected one of {KERNEL_FORMS}")


def datum_from_spec(spec) -> mmod.InitialDatum:
    spec = _spec(spec)
    form = spec.get("form")
    params = {k: float(v) for k, v in (spec.get("params", {}) or {}).items() if k not in ("x", "values")}
    try:
        if form == "log_gaussian":
            d = mmod.log_gaussian(**params)
        elif form == "two_sided_power":
            d = mmod.two_sided_power(**params)
        elif form == "indicator":
            d = mmod.indicator(**params)
        elif form == "compact_bump":
            d = mmod.compact_bump(**params)
        elif form == "tabulated":
            raw = spec.get("params", {})
            d = mmod.tabulated_datum(raw["x"], raw["values"])
        else:
            raise DomainError(f"unknown datum form {form!r}; expected one of {DATUM_FORMS}")
    except (TypeError, KeyError) as exc:
        raise DomainError(f"bad parameters for datum form {form!r}: {exc}") from exc
    tails = spec.get("tails") or {}
    if tails:
        up = tails.get("upper")
        low = tails.get("lower")
        kw = {}
        if up:
            kw["upper_tail"] = mmod.UpperTail(float(up["a0"]), float(up["q0"]), float(up.get("r", math.inf)))
        if low:
            kw["lower_tail"] = mmod.LowerTail(float(low["b0"]), float(low["p0"]), float(low.get("rho", -math.inf)))
        d = mmod.InitialDatum(d.evaluate, d.p0, d.q0, kw.get("upper_tail", d.upper_tail),
                              kw.get("lower_tail", d.lower_tail), d.closed_form_mellin, d.support, d.breakpoints,
                              d.form, d.params, d.smooth)
    return d


@dataclass
class ExperimentConfig:
    """Everything a CLI command needs; round-trips through ``to_dict``/``from_dict``."""

    kernel: dict = field(default_factory=lambda: {"form": "homogeneous"})
    datum: dict = field(default_factory=lambda: {"form": "log_gaussian", "params": {"y0": -5.0}})
    t: list = field(default_factory=lambda: [1.0])
    x: list = field(default_factory=list)
    c: float | None = None
    kmax: int | None = None
    grid: dict = field(default_factory=dict)
    nx: int = 64
    evaluator: str = "mellin"
    out: str | None = None
    format: str = "csv"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.format not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.format!r}")
        if self.evaluator not in ("mellin", "grid"):
            raise DomainError("evaluator must be 'mellin' or 'grid'")
        if any(not (isinstance(v, (int, float)) and v >= 0) for v in self.t):
            raise DomainError("t values must be nonnegative numbers")
        if any(not (isinstance(v, (int, float)) and v > 0) for v in self.x):
            raise DomainError("x values must be positive numbers")
        if self.nx < 4:
            raise DomainError("nx must be at least 4")
        unknown = set(self.grid) - {"y_min", "y_max", "dy", "dt", "t_end"}
        if unknown:
            raise DomainError(f"unknown grid keys: {sorted(unknown)}")


def format_float(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_text(path: str | Path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return p
