"""The model roster as ModelSpecs keyed by acronym."""

from typing import Dict, Iterable, Optional

from src.state import ROSTER_ORDER, ModelSpec

_FIELDS = {
    "NB": dict(family="NB", variant="classical"),
    "NB-m": dict(family="NB", variant="class_weighted"),
    "KNN": dict(family="KNN", variant="classical"),
    "KNN-m": dict(family="KNN", variant="class_weighted"),
    "LR": dict(family="LR", variant="classical"),
    "LR-m": dict(family="LR", variant="class_weighted"),
    "RF": dict(family="RF", variant="classical"),
    "RF-m": dict(family="RF", variant="class_weighted"),
    "GBT": dict(family="GBT", variant="classical"),
    "GBT-m": dict(family="GBT", variant="class_weighted"),
    "MLP-A": dict(family="MLP", variant="classical", optimizer="adam_sgd"),
    "MLP-A-m": dict(family="MLP", variant="class_weighted", optimizer="adam_sgd"),
    "MLP-l": dict(family="MLP", variant="classical", optimizer="lbfgs"),
    "MLP-l-m": dict(family="MLP", variant="class_weighted", optimizer="lbfgs"),
}


def spec_for(acronym: str, seed: int = 0, hyperparameters: Optional[dict] = None) -> ModelSpec:
    if acronym not in _FIELDS:
        raise ValueError(f"unknown model acronym '{acronym}'; known: {sorted(_FIELDS)}")
    return ModelSpec(**_FIELDS[acronym], seed=seed, hyperparameters=hyperparameters or {})


def default_roster(seed: int = 0, acronyms: Iterable[str] = ROSTER_ORDER) -> Dict[str, ModelSpec]:
    return {acronym: spec_for(acronym, seed) for acronym in acronyms}
