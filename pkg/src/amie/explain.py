"""Model intervention effects and ranked attribution reports.

The intervention effect of a binary feature on one instance is the change
in the model's predicted outcome probability when that feature is toggled
from 0 to 1 with every other feature held at its observed value; the
average effect is its mean over an evaluation dataset.  Under an exact
conditional model on a fully observed world, a feature's average effect
is non-zero exactly when that feature is a direct cause of the outcome,
which is what the rest of this package stress-tests.

Rows where the exact model's conditional is undefined (zero-probability
configurations) are excluded from the average and counted.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .dataset import Dataset
from .graphs import (
    CausalDag,
    RoleKind,
    classify_false_positive,
    classify_roles,
)
from .learners import ProbModel
from .stats import Chi2Result, chi_square_columns

REPORT_SCHEMA_VERSION = 1

ORACLE_EPSILON = 1e-9  # numerical noise only
TRAINED_EPSILON = 0.01  # below sampling noise at ten-thousand-row datasets


class ExplainError(ValueError):
    pass


def mie(model: ProbModel, instance, i: int) -> float:
    """Intervention effect of feature ``i`` on one instance: predict with
    the feature forced to 1 minus predict with it forced to 0 (two model
    queries).  NaN when either arm's conditional is undefined."""
    row = np.asarray(instance)
    if row.ndim != 1 or row.size != model.feature_count:
        raise ExplainError("instance arity does not match the model")
    if not 0 <= i < model.feature_count:
        raise ExplainError(f"feature index {i} out of range")
    hi = row.copy()
    lo = row.copy()
    hi[i] = 1
    lo[i] = 0
    return model.predict(hi) - model.predict(lo)


def amie(model: ProbModel, eval_data: Dataset, i: int) -> float:
    """Average intervention effect over the evaluation rows with a defined
    effect; errors out if no row has one."""
    value, defined = _amie_one(model, eval_data, i)
    if defined == 0:
        raise ExplainError(
            f"intervention effect undefined on every row for feature {i}"
        )
    return value


def _amie_one(model: ProbModel, eval_data: Dataset, i: int) -> tuple[float, int]:
    if eval_data.row_count == 0:
        raise ExplainError("evaluation data is empty")
    if not 0 <= i < eval_data.feature_count:
        raise ExplainError(f"feature index {i} out of range")
    X = eval_data.features
    hi = X.copy()
    lo = X.copy()
    hi[:, i] = 1
    lo[:, i] = 0
    stacked = np.vstack([hi, lo])
    if getattr(model, "kind", "") == "oracle":
        # memoize repeated query rows: each distinct row costs one
        # enumeration pass instead of one per duplicate
        unique, inverse = np.unique(stacked, axis=0, return_inverse=True)
        preds = model.predict_many(unique)[inverse]
    else:
        preds = model.predict_many(stacked)
    effects = preds[: X.shape[0]] - preds[X.shape[0] :]
    defined = ~np.isnan(effects)
    count = int(defined.sum())
    if count == 0:
        return float("nan"), 0
    return float(np.mean(effects[defined])), count


def amie_values(model: ProbModel, eval_data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Average effects for every feature; also returns the per-feature
    count of rows excluded for undefined conditionals."""
    m = eval_data.feature_count
    values = np.zeros(m)
    undefined = np.zeros(m, dtype=np.int64)
    for i in range(m):
        value, count = _amie_one(model, eval_data, i)
        values[i] = value
        undefined[i] = eval_data.row_count - count
    return values, undefined


def amie_brute_force(model: ProbModel, eval_data: Dataset, i: int) -> float:
    """Reference path: rebuild both intervened rows per instance and query
    the model row by row, no memoization."""
    effects = []
    for k in range(eval_data.row_count):
        effect = mie(model, eval_data.features[k], i)
        if not math.isnan(effect):
            effects.append(effect)
    if not effects:
        raise ExplainError("all rows undefined")
    return float(np.mean(np.asarray(effects)))


def default_epsilon(model: ProbModel) -> float:
    return ORACLE_EPSILON if getattr(model, "kind", "") == "oracle" else TRAINED_EPSILON


def nonzero_set(
    amies: Iterable[float], epsilon: float, relative: bool = False
) -> set[int]:
    """Indices whose |effect| exceeds the threshold.  In relative mode the
    threshold is ``epsilon`` times the largest |effect|."""
    if epsilon < 0:
        raise ExplainError("epsilon must be non-negative")
    values = np.asarray(list(amies), dtype=np.float64)
    cut = epsilon * np.nanmax(np.abs(values), initial=0.0) if relative else epsilon
    return {int(i) for i in np.nonzero(np.abs(values) > cut)[0]}


@dataclass(frozen=True)
class FilterOutcome:
    p_values: dict[int, float]
    degenerate: set[int]
    filtered: set[int]  # marginally independent of the outcome at alpha


def independence_filter(
    data: Dataset, candidates: Iterable[int], alpha: float = 0.05
) -> FilterOutcome:
    """Marginal chi-square screen for flagged features.

    Candidates whose 2x2 feature/outcome table shows no dependence
    (p > alpha) are marked filtered; structurally that is the signature
    of the parent-of-proxy and shared-latent-ancestor false positives.
    A constant column is degenerate: p is defined as 1.
    """
    if not 0 < alpha < 1:
        raise ExplainError("alpha must lie strictly between 0 and 1")
    p_values: dict[int, float] = {}
    degenerate: set[int] = set()
    filtered: set[int] = set()
    for i in sorted(set(int(c) for c in candidates)):
        if not 0 <= i < data.feature_count:
            raise ExplainError(f"candidate index {i} out of range")
        result: Chi2Result = chi_square_columns(data.features[:, i], data.outcome)
        p_values[i] = result.p_value
        if result.degenerate:
            degenerate.add(i)
        if result.p_value > alpha:
            filtered.add(i)
    return FilterOutcome(p_values=p_values, degenerate=degenerate, filtered=filtered)


@dataclass(frozen=True)
class ConsistencyScores:
    recall: float  # |truth ∩ found| / |truth|; the headline overlap ratio
    precision: float  # |truth ∩ found| / |found|, 0 when found is empty
    f1: float


def consistency(truth: Iterable[int], found: Iterable[int]) -> ConsistencyScores:
    truth_set = set(truth)
    found_set = set(found)
    if not truth_set:
        raise ExplainError("the ground-truth set must not be empty")
    hit = len(truth_set & found_set)
    recall = hit / len(truth_set)
    precision = hit / len(found_set) if found_set else 0.0
    f1 = 0.0 if recall + precision == 0 else 2 * recall * precision / (recall + precision)
    return ConsistencyScores(recall=recall, precision=precision, f1=f1)


@dataclass(frozen=True)
class FeatureRecord:
    index: int
    name: str
    amie: float
    abs_rank: int  # 1-based, ordered by |amie| descending, ties by index
    nonzero: bool
    p_value: float
    degenerate: bool
    filtered: bool
    undefined_rows: int
    true_role: Optional[str] = None
    role_witness: Optional[int] = None
    fp_case: Optional[str] = None


@dataclass(frozen=True)
class AmieReport:
    records: tuple[FeatureRecord, ...]
    eval_row_count: int
    epsilon: float
    alpha: float
    model_kind: str
    schema_version: int = REPORT_SCHEMA_VERSION

    def nonzero_indices(self) -> set[int]:
        return {r.index for r in self.records if r.nonzero}

    def retained_indices(self) -> set[int]:
        """Non-zero features surviving the marginal independence screen."""
        return {r.index for r in self.records if r.nonzero and not r.filtered}

    def ranked(self) -> list[FeatureRecord]:
        return sorted(self.records, key=lambda r: r.abs_rank)


def build_report(
    model: ProbModel,
    eval_data: Dataset,
    epsilon: Optional[float] = None,
    alpha: float = 0.05,
    truth_dag: Optional[CausalDag] = None,
    chain_activators: bool = False,
) -> AmieReport:
    """Assemble per-feature effects, ranks, non-zero and filter decisions.

    With a ground-truth graph, each feature is annotated with its causal
    role; non-zero features whose role is "other" additionally get the
    structural false-positive case.  Features map to the graph's observed
    non-outcome nodes in ascending node order.
    """
    if model.feature_count != eval_data.feature_count:
        raise ExplainError("model and data disagree on the feature count")
    if epsilon is None:
        epsilon = default_epsilon(model)
    values, undefined = amie_values(model, eval_data)
    nz = nonzero_set(values, epsilon)
    screen = independence_filter(eval_data, nz, alpha=alpha)

    roles = {}
    fp_cases = {}
    if truth_dag is not None:
        feature_nodes = truth_dag.observed_features
        if len(feature_nodes) != eval_data.feature_count:
            raise ExplainError(
                "ground-truth graph has a different observed feature count"
            )
        all_roles = classify_roles(truth_dag, chain_activators=chain_activators)
        for col, node in enumerate(feature_nodes):
            roles[col] = all_roles[node]
            if col in nz and all_roles[node].kind is RoleKind.OTHER:
                fp_cases[col] = classify_false_positive(truth_dag, node)

    order = sorted(range(len(values)), key=lambda i: (-abs(values[i]), i))
    rank_of = {i: k + 1 for k, i in enumerate(order)}

    records = []
    for i, name in enumerate(eval_data.feature_names):
        role = roles.get(i)
        fp = fp_cases.get(i)
        records.append(
            FeatureRecord(
                index=i,
                name=name,
                amie=float(values[i]),
                abs_rank=rank_of[i],
                nonzero=i in nz,
                p_value=screen.p_values.get(i, float("nan")),
                degenerate=i in screen.degenerate,
                filtered=i in screen.filtered,
                undefined_rows=int(undefined[i]),
                true_role=role.kind.value if role else None,
                role_witness=role.witness if role else None,
                fp_case=fp.kind.value if fp else None,
            )
        )
    return AmieReport(
        records=tuple(records),
        eval_row_count=eval_data.row_count,
        epsilon=float(epsilon),
        alpha=float(alpha),
        model_kind=getattr(model, "kind", "unknown"),
    )


def report_to_json(report: AmieReport) -> str:
    payload = {
        "schema_version": report.schema_version,
        "model_kind": report.model_kind,
        "eval_row_count": report.eval_row_count,
        "epsilon": report.epsilon,
        "alpha": report.alpha,
        "features": [
            {
                "index": r.index,
                "name": r.name,
                "amie": r.amie,
                "abs_rank": r.abs_rank,
                "nonzero": r.nonzero,
                "p_value": None if math.isnan(r.p_value) else r.p_value,
                "degenerate": r.degenerate,
                "filtered": r.filtered,
                "undefined_rows": r.undefined_rows,
                "true_role": r.true_role,
                "role_witness": r.role_witness,
                "fp_case": r.fp_case,
            }
            for r in report.records
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


_CSV_COLUMNS = [
    "index", "name", "amie", "abs_rank", "nonzero", "p_value",
    "degenerate", "filtered", "undefined_rows", "true_role",
    "role_witness", "fp_case",
]


def report_to_csv(report: AmieReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"schema_version={report.schema_version}"])
    writer.writerow(_CSV_COLUMNS)
    for r in report.ranked():
        writer.writerow(
            [
                r.index, r.name, repr(r.amie), r.abs_rank, int(r.nonzero),
                "" if math.isnan(r.p_value) else repr(r.p_value),
                int(r.degenerate), int(r.filtered), r.undefined_rows,
                r.true_role or "", "" if r.role_witness is None else r.role_witness,
                r.fp_case or "",
            ]
        )
    return buf.getvalue()
