"""
Experiment configuration.

Config files are flat key=value text (dotenv syntax, # comments), read with
python-dotenv. Precedence: ExperimentConfig defaults < config file < CLI flags.
Lists are comma-separated. Unknown keys are rejected.

The default hyperparameter grids ship as grids.json at the repository root and are
loaded once at import.
"""

import hashlib
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from src.errors import ConfigError
from src.state import DEFAULT_HYPERPARAMETERS, ExperimentConfig, ModelSpec

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

_GRIDS_PATH = Path(__file__).parent.parent / "grids.json"


def load_grids(path: str | Path | None = None) -> Dict[str, Any]:
    """{"version": str, "grids": {family: {hyperparameter: [values]}}}"""
    path = Path(path) if path is not None else _GRIDS_PATH
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"grids file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grids file {path} is not valid JSON: {exc}") from exc

    grids = raw.get("grids")
    if not isinstance(grids, dict):
        raise ConfigError(f"grids file {path} has no 'grids' object")
    for family, grid in grids.items():
        if family not in DEFAULT_HYPERPARAMETERS:
            raise ConfigError(f"grids file {path}: unknown family '{family}'")
        unknown = sorted(set(grid) - set(DEFAULT_HYPERPARAMETERS[family]))
        if unknown:
            raise ConfigError(f"grids file {path}: unknown {family} hyperparameter(s) {unknown}")
    return {"version": raw.get("grids_metadata", {}).get("version", "unversioned"), "grids": grids}


DEFAULT_GRIDS: Dict[str, Any] = load_grids()


# ---------------------------------------------------------------------------
# Experiment config
# ---------------------------------------------------------------------------

_LIST_KEYS = {"exclude_columns", "k_values", "roster", "rules"}
_BOOL_KEYS = {"select_features", "rebalance", "search", "save_models"}
_INT_KEYS = {"seed", "mi_bins", "folds", "jobs", "min_cluster_size", "top_ensembles"}
_FLOAT_KEYS = {"test_fraction"}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(key: str, raw: str) -> bool:
    value = raw.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"config key '{key}': expected a boolean, got '{raw}'")


def _parse_value(key: str, raw: Optional[str]) -> Any:
    if raw is None or raw.strip() == "":
        return [] if key in _LIST_KEYS else None
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            items = [item.strip() for item in raw.split(",") if item.strip()]
            return [int(i) for i in items] if key == "k_values" else items
        if key in _BOOL_KEYS:
            return _parse_bool(key, raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': cannot parse '{raw}': {exc}") from exc
    return raw


def read_config_file(path: str | Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    unknown = sorted(set(values) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown} in {path}")
    parsed = {key: _parse_value(key, raw) for key, raw in values.items()}
    # an empty value means "use the default"
    return {key: value for key, value in parsed.items() if value is not None and value != []}


def build_config(path: str | Path | None = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Defaults, then the config file, then every override that is not None."""
    values: Dict[str, Any] = read_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if key not in ExperimentConfig.model_fields:
            raise ConfigError(f"unknown config key '{key}'")
        if value is not None:
            values[key] = value
    try:
        return ExperimentConfig(**values)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {problems}") from exc


def require_seed(config: ExperimentConfig) -> int:
    if config.seed is None:
        raise ConfigError("a seed is required for experiment sweeps (--seed or seed= in the config file)")
    return config.seed


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def grids_for(config: ExperimentConfig) -> Dict[str, Any]:
    return load_grids(config.grids) if config.grids else DEFAULT_GRIDS


# ---------------------------------------------------------------------------
# ModelSpec key-value blocks
# ---------------------------------------------------------------------------

_HP_PREFIX = "hp_"


def _format_number(value: Any) -> str:
    if value is None:
        return "none"
    return repr(value)


def _parse_number(key: str, raw: Optional[str]) -> Optional[float | int]:
    if raw is None or raw.strip().lower() in ("", "none"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"spec key '{key}': expected a number, got '{raw}'") from exc


def spec_to_text(spec: ModelSpec) -> str:
    lines = [f"family={spec.family}", f"variant={spec.variant}"]
    if spec.optimizer is not None:
        lines.append(f"optimizer={spec.optimizer}")
    lines.append(f"seed={spec.seed}")
    for name in sorted(spec.hyperparameters):
        lines.append(f"{_HP_PREFIX}{name}={_format_number(spec.hyperparameters[name])}")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str) -> ModelSpec:
    values = dotenv_values(stream=io.StringIO(text))
    known = {"family", "variant", "optimizer", "seed"}
    unknown = sorted(k for k in values if k not in known and not k.startswith(_HP_PREFIX))
    if unknown:
        raise ConfigError(f"unknown spec key(s) {unknown}")
    if not values.get("family"):
        raise ConfigError("spec block has no family")

    fields: Dict[str, Any] = {"family": values["family"]}
    if values.get("variant"):
        fields["variant"] = values["variant"]
    if values.get("optimizer"):
        fields["optimizer"] = values["optimizer"]
    if values.get("seed"):
        seed = _parse_number("seed", values["seed"])
        if not isinstance(seed, int):
            raise ConfigError(f"spec key 'seed': expected an integer, got '{values['seed']}'")
        fields["seed"] = seed
    fields["hyperparameters"] = {
        key[len(_HP_PREFIX):]: _parse_number(key, raw) for key, raw in values.items() if key.startswith(_HP_PREFIX)
    }
    try:
        return ModelSpec(**fields)
    except ValidationError as exc:
        raise ConfigError(f"invalid model spec: {exc.errors()[0]['msg']}") from exc


def specs_to_lines(specs: Mapping[str, ModelSpec]) -> List[str]:
    """One '[acronym]' header plus key-value block per spec, in mapping order."""
    lines: List[str] = []
    for acronym, spec in specs.items():
        lines.append(f"[{acronym}]")
        lines.extend(spec_to_text(spec).splitlines())
        lines.append("")
    return lines


def specs_from_lines(text: str) -> Dict[str, ModelSpec]:
    """Inverse of specs_to_lines: '[acronym]' headers, each followed by a key-value block."""
    blocks: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            if not current or current in blocks:
                raise ConfigError(f"line {number}: empty or repeated model header '{stripped}'")
            blocks[current] = []
        elif stripped and not stripped.startswith("#"):
            if current is None:
                raise ConfigError(f"line {number}: key-value line before the first [acronym] header")
            blocks[current].append(stripped)

    specs: Dict[str, ModelSpec] = {}
    for acronym, lines in blocks.items():
        spec = spec_from_text("\n".join(lines) + "\n")
        if spec.acronym != acronym:
            raise ConfigError(f"block [{acronym}] describes a {spec.acronym} model")
        specs[acronym] = spec
    return specs


def read_specs(path: str | Path) -> Dict[str, ModelSpec]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model spec file not found: {path}")
    return specs_from_lines(path.read_text(encoding="utf-8"))
