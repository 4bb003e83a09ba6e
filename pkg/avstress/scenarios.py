from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Union

from .config import apply_overrides, from_dict, read_json_object, to_dict
from .crosswalk import SCENARIOS, PedestrianState, ScenarioConfig, preset
from .errors import ConfigError


def scenario_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    return to_dict(cfg)


def scenario_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    """
    Build a scenario from its JSON form.

    Only ``pedestrians`` is required; every other field falls back to the defaults.
    """
    if "pedestrians" not in data:
        raise ConfigError("scenario config needs a 'pedestrians' list")
    peds = data["pedestrians"]
    if not isinstance(peds, list) or not peds:
        raise ConfigError("'pedestrians' must be a non-empty list")
    body = dict(data)
    body["pedestrians"] = tuple(
        from_dict(PedestrianState, p, f"pedestrians.{i}.") for i, p in enumerate(peds)
    )
    return from_dict(ScenarioConfig, body)


def load_scenario(
    ref: Union[int, str, Path],
    overrides: Optional[Dict[str, Any]] = None,
    horizon: Optional[int] = None,
) -> ScenarioConfig:
    """
    Resolve a scenario reference: a preset id (1, 2, 3) or a JSON config path.

    ``overrides`` are dotted keys into the scenario's dict form (``idm.b_max``).
    """
    text = str(ref).strip()
    if text.isdigit() and int(text) in SCENARIOS:
        cfg = preset(int(text))
        data = scenario_to_dict(cfg)
    elif text.isdigit():
        raise ConfigError(f"unknown scenario id {text}; choose one of {sorted(SCENARIOS)} or a JSON path")
    else:
        path = Path(text)
        data = read_json_object(path)
        data.setdefault("name", path.stem)
        # normalise through the dataclass so defaults exist for every overridable key
        data = scenario_to_dict(scenario_from_dict(data))

    if overrides:
        data = apply_overrides(data, overrides)
    if horizon is not None:
        data["horizon"] = int(horizon)
    return scenario_from_dict(data)
