"""
Ensemble prediction and enumeration over the model roster.

Members are fitted once and shared: an ensemble is scored either by running its
fitted members (predict_ensemble) or by aggregating member vote columns that were
already computed (votes_from_columns).
"""

import itertools
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.errors import DimensionMismatchError
from src.rules import aggregate, aggregate_mv
from src.state import EnsembleSpec, Rule

logger = logging.getLogger(__name__)

ENSEMBLE_SIZES: Dict[str, tuple[int, ...]] = {
    "MV": (3, 5),
    "OR": (2, 3, 4, 5),
}


def _member_acronym(member) -> str:
    spec = getattr(member, "spec", None)
    return spec.acronym if spec is not None else type(member).__name__


def _check_members(spec: EnsembleSpec, members: Sequence) -> None:
    names = [_member_acronym(m) for m in members]
    if names != list(spec.members):
        raise ValueError(f"{spec.label}: members {names} do not match the ensemble order {spec.members}")


def vote_matrix(members: Sequence, features: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    """n x m matrix of hard member decisions, one column per member in order."""
    features = np.asarray(features, dtype=np.float64)
    if n_jobs == 1 or len(members) < 2:
        columns = [m.predict(features) for m in members]
    else:
        columns = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(m.predict)(features) for m in members)
    if not columns:
        return np.zeros((features.shape[0], 0), dtype=np.int64)
    return np.column_stack(columns).astype(np.int64)


def predict_ensemble(
    spec: EnsembleSpec,
    members: Sequence,
    features: np.ndarray,
    invocations: Optional[Dict[str, int]] = None,
) -> np.ndarray:
    """
    Aggregate member decisions under the ensemble's rule.

    OR evaluates members in member order and, per object, stops at the first member
    that flags fraud: later members only see the objects still unflagged. MV always
    evaluates every member on every object.

    invocations, when given, is incremented per member by the number of objects
    that member was asked to classify.
    """
    _check_members(spec, members)
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    counter = invocations if invocations is not None else {}

    if spec.rule == "MV":
        for name in spec.members:
            counter[name] = counter.get(name, 0) + n
        return aggregate_mv(vote_matrix(members, features))

    result = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    for name, member in zip(spec.members, members):
        counter[name] = counter.get(name, 0) + pending.size
        if pending.size == 0:
            continue
        flagged = np.asarray(member.predict(features[pending])) == 1
        result[pending[flagged]] = 1
        pending = pending[~flagged]
    return result


def votes_from_columns(spec: EnsembleSpec, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Aggregate cached member predictions, keyed by acronym."""
    missing = [name for name in spec.members if name not in columns]
    if missing:
        raise KeyError(f"{spec.label}: no cached predictions for member(s) {missing}")
    stacked = [np.asarray(columns[name]).reshape(-1) for name in spec.members]
    lengths = {c.size for c in stacked}
    if len(lengths) > 1:
        raise DimensionMismatchError(f"{spec.label}: member prediction columns differ in length {sorted(lengths)}")
    return aggregate(spec.rule, np.column_stack(stacked))


def enumerate_ensembles(
    pool: Sequence[str],
    rule: Rule,
    sizes: Optional[Iterable[int]] = None,
) -> List[EnsembleSpec]:
    """
    Every member subset of the allowed sizes, sizes ascending, lexicographic over
    pool order within a size. Indices are 1-based and stable for a given pool.
    """
    pool = list(pool)
    if len(set(pool)) != len(pool):
        duplicates = sorted({name for name in pool if pool.count(name) > 1})
        raise ValueError(f"ensemble pool contains duplicate entries: {duplicates}")

    specs: List[EnsembleSpec] = []
    for size in sizes if sizes is not None else ENSEMBLE_SIZES[rule]:
        if size > len(pool):
            continue
        for members in itertools.combinations(pool, size):
            specs.append(EnsembleSpec(members=list(members), rule=rule, index=len(specs) + 1))
    logger.debug("enumerated %d %s ensembles over a pool of %d", len(specs), rule, len(pool))
    return specs
