from __future__ import annotations

import json
import typing
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Type, TypeVar

from .errors import ConfigError

T = TypeVar("T")

SOLVERS = ("mcts", "drl")
# `--set` keys without one of these prefixes address the scenario
SECTIONS = ("scenario", "mcts", "drl", "reward")


@dataclass(frozen=True)
class Defaults:
    runs_dir_name: str = "runs"
    summary_file_name: str = "summary.json"
    run_file_name: str = "run.json"
    trajectory_file_name: str = "trajectory.csv"
    curve_file_name: str = "learning_curve.csv"
    plot_file_name: str = "trajectory.svg"
    policy_file_name: str = "policy.bin"


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "1"
    solver: str = "mcts"
    seed: int = 0
    budget: int = 2_000_000
    out_dir: Optional[Path] = None
    horizon: Optional[int] = None
    iterations: Optional[int] = None
    overrides: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose one of {', '.join(SOLVERS)}")
        if self.budget <= 0:
            raise ConfigError("budget must be > 0")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.iterations is not None and self.iterations < 1:
            raise ConfigError("iterations must be >= 1")


def parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(items: Iterable[str]) -> Dict[str, Dict[str, Any]]:
    """
    Split ``section.a.b=value`` items into {section: {"a.b": value}}.

    Keys that do not start with a known section address the scenario.
    """
    out: Dict[str, Dict[str, Any]] = {s: {} for s in SECTIONS}
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override must look like key=value (got {item!r})")
        head, _, rest = key.partition(".")
        if head in SECTIONS and rest:
            out[head][rest] = parse_value(raw.strip())
        else:
            out["scenario"][key] = parse_value(raw.strip())
    return out


def set_dotted(data: Dict[str, Any], path: str, value: Any) -> None:
    node: Any = data
    parts = path.split(".")
    for part in parts[:-1]:
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError(f"unknown parameter {path!r}")
    last = parts[-1]
    if isinstance(node, list) and last.isdigit() and int(last) < len(node):
        node[int(last)] = value
    elif isinstance(node, dict) and last in node:
        node[last] = value
    else:
        raise ConfigError(f"unknown parameter {path!r}")


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = json.loads(json.dumps(data))
    for path, value in overrides.items():
        set_dotted(merged, path, value)
    return merged


def to_dict(obj: Any) -> Dict[str, Any]:
    """Plain-JSON form of a (nested) parameter dataclass."""
    out: Dict[str, Any] = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if is_dataclass(v):
            v = to_dict(v)
        elif isinstance(v, (tuple, list)):
            v = [to_dict(x) if is_dataclass(x) else x for x in v]
        elif isinstance(v, Path):
            v = str(v)
        out[f.name] = v
    return out


def from_dict(cls: Type[T], data: Dict[str, Any], where: str = "") -> T:
    """Build a (nested) parameter dataclass, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where or cls.__name__}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(where + k for k in unknown)}")
    kwargs: Dict[str, Any] = {}
    for name, value in data.items():
        hint = hints.get(name)
        if isinstance(hint, type) and is_dataclass(hint) and isinstance(value, dict):
            value = from_dict(hint, value, f"{where}{name}.")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where or cls.__name__}: {e}") from e


def read_json_object(path: Path) -> Dict[str, Any]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected JSON object, got {type(obj).__name__}")
    return obj
