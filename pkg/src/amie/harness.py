"""Seeded, resumable experiment pipelines behind the CLI.

Five experiment kinds:

* ``no_latent``: random fully observed worlds; how well the non-zero
  average-effect set recovers the outcome's parents.
* ``connected_latent``: random worlds with hidden nodes (never leaving a
  standalone latent direct cause); truth includes activators and proxies,
  false positives are tallied by structural case, and the marginal
  independence screen's impact on precision is recorded.
* ``standalone_latent``: latent roots grafted straight onto the outcome;
  records model accuracy and recovery side by side.
* ``inducing_count``: how many random masked DAGs contain a non-causal
  feature with an inducing (or relaxed inducing) path to the outcome.
* ``semisynthetic``: sample a parsed benchmark network, one-hot encode,
  train models and rank features by average intervention effect next to
  the models' own importance measures.

Every replicate derives its stage seeds from the master seed and grid
coordinates, so any single replicate can be reproduced in isolation and
reruns are byte-identical.  Runs append one JSON row per replicate to
``rows.jsonl`` as they finish; interrupted runs resume from that file.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from . import __version__
from .dataio import DiscreteNet, load_bif, most_frequent_level, one_hot_encode
from .dataset import DataError, Dataset, split
from .explain import (
    amie_values,
    build_report,
    consistency,
    independence_filter,
    nonzero_set,
)
from .graphs import (
    CausalDag,
    FpKind,
    RoleKind,
    classify_roles,
    d_separated,
    has_inducing_path,
    inducing_reachable,
    make_dag,
)
from .learners import (
    ForestParams,
    LogRegParams,
    accuracy,
    fit_forest,
    fit_logreg,
    permutation_importance,
)
from .stats import chi_square_2x2
from .synth import (
    BayesNet,
    GenConfig,
    LatentMode,
    generate_dag,
    mask_latents,
    oracle_model,
    random_cpts,
    sample,
)
from . import reference

RESULT_SCHEMA_VERSION = 1

#: reference node/edge counts for the bundled benchmark networks
REFERENCE_NETWORK_COUNTS = {"insurance": (26, 50), "water": (32, 66)}

CAUSAL_ROLE_KINDS = frozenset(
    {RoleKind.DIRECT_CAUSE, RoleKind.ACTIVATOR, RoleKind.PROXY}
)


class InvariantError(RuntimeError):
    """An internal consistency check failed (stored aggregates vs rows,
    corrupted result files, impossible states)."""


class ExperimentKind(Enum):
    NO_LATENT = "no_latent"
    CONNECTED_LATENT = "connected_latent"
    STANDALONE_LATENT = "standalone_latent"
    INDUCING_PATH_COUNT = "inducing_count"
    SEMI_SYNTHETIC = "semisynthetic"


FULL_GRID_NODES = (40, 60, 80)
FULL_GRID_DENSITIES = (2.0, 4.0, 6.0)
FULL_GRID_LATENTS = (2, 4, 6)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    nodes: tuple[int, ...] = (40,)
    densities: tuple[float, ...] = (2.0,)
    latents: tuple[int, ...] = (2,)
    replicates: int = 10
    sample_size: int = 10_000
    models: tuple[str, ...] = ("logreg", "rf")
    epsilon: Optional[float] = None  # None: per-model default
    alpha: float = 0.05
    train_fraction: float = 0.7
    seed: int = 0
    # semisynthetic only
    bif_path: Optional[str] = None
    outcome_var: Optional[str] = None
    positive_levels: tuple[str, ...] = ()
    reference_counts: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if not self.nodes or not self.densities or not self.latents:
            raise ValueError("parameter grids must not be empty")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly in (0, 1)")
        bad = [m for m in self.models if m not in ("logreg", "rf", "oracle")]
        if bad:
            raise ValueError(f"unknown model kind(s): {bad}")
        if self.kind is ExperimentKind.SEMI_SYNTHETIC and not self.bif_path:
            raise ValueError("semisynthetic runs need a network file path")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def full_scale(spec: ExperimentSpec) -> ExperimentSpec:
    """The full reference grid for a desk-scale spec."""
    replicates = 30 if spec.kind is ExperimentKind.NO_LATENT else 100
    return replace(
        spec,
        nodes=FULL_GRID_NODES,
        densities=FULL_GRID_DENSITIES,
        latents=(0,) if spec.kind is ExperimentKind.NO_LATENT else FULL_GRID_LATENTS,
        replicates=replicates,
    )


# --- seed derivation -----------------------------------------------------------


def _density_key(density: float) -> int:
    return int(round(density * 1000))


def replicate_seeds(
    master: int, nodes: int, density: float, latents: int, rep: int
) -> dict[str, int]:
    """Stage seeds for one replicate, derived counter-style from the master
    seed and grid coordinates.

    The latent count deliberately stays out of the derivation: cells that
    differ only in the number of hidden nodes share base graphs and world
    parameters, so per-replicate comparisons across latent counts are
    paired and the latent structure itself is the only moving part.
    """
    del latents
    dkey = _density_key(density)
    ss = np.random.SeedSequence([master, nodes, dkey, rep])
    dag, mask, cpt, samp, spl, model = (
        int(s) for s in ss.generate_state(6, np.uint64)
    )
    return {
        "dag": dag,
        "mask": mask,
        "cpt": cpt,
        "sample": samp,
        "split": spl,
        "model": model,
    }


# --- single synthetic replicate ------------------------------------------------


_MODE_FOR_KIND = {
    ExperimentKind.NO_LATENT: LatentMode.NONE,
    ExperimentKind.CONNECTED_LATENT: LatentMode.CONNECTED_ONLY,
    ExperimentKind.STANDALONE_LATENT: LatentMode.STANDALONE_DC,
}


def _truth_columns(dag: CausalDag, kind: ExperimentKind) -> set[int]:
    roles = classify_roles(dag)
    wanted = (
        CAUSAL_ROLE_KINDS
        if kind is ExperimentKind.CONNECTED_LATENT
        else frozenset({RoleKind.DIRECT_CAUSE})
    )
    cols = {}
    for col, node in enumerate(dag.observed_features):
        cols[node] = col
    return {cols[n] for n, role in roles.items() if n in cols and role.kind in wanted}


def _fit_model(kind: str, train: Dataset, net: BayesNet, model_seed: int):
    if kind == "logreg":
        return fit_logreg(train, LogRegParams())
    if kind == "rf":
        return fit_forest(train, ForestParams(seed=model_seed))
    if kind == "oracle":
        return oracle_model(net)
    raise ValueError(f"unknown model kind {kind!r}")


def run_synthetic_replicate(
    kind: ExperimentKind,
    nodes: int,
    density: float,
    latents: int,
    rep: int,
    spec: ExperimentSpec,
) -> list[dict]:
    """One world, one sample, every requested model; returns result rows."""
    seeds = replicate_seeds(spec.seed, nodes, density, latents, rep)
    mode = _MODE_FOR_KIND[kind]
    config = GenConfig(
        total_nodes=nodes,
        edge_ratio=density,
        latent_count=latents if mode is not LatentMode.NONE else 0,
        latent_mode=mode,
        seed=seeds["dag"],
    )
    dag = generate_dag(config)
    masked = mask_latents(dag, replace(config, seed=seeds["mask"]))
    net = random_cpts(masked, replace(config, seed=seeds["cpt"]))
    data = sample(net, spec.sample_size, seeds["sample"])
    data = split(data, spec.train_fraction, seeds["split"])
    train, test = data.train_view(), data.test_view()
    truth = _truth_columns(masked, kind)

    if not truth:
        raise InvariantError("generated world has an empty ground-truth set")

    rows = []
    for model_kind in spec.models:
        model = _fit_model(model_kind, train, net, seeds["model"])
        report = build_report(
            model, test, epsilon=spec.epsilon, alpha=spec.alpha, truth_dag=masked
        )
        found = report.nonzero_indices()
        retained = report.retained_indices()
        scores = consistency(truth, found)
        after = consistency(truth, retained)
        fp_counts = {k.value: 0 for k in FpKind}
        for record in report.records:
            if record.fp_case is not None:
                fp_counts[record.fp_case] += 1
        rows.append(
            {
                "key": _row_key(kind, nodes, density, latents, model_kind, rep),
                "kind": kind.value,
                "nodes": nodes,
                "density": density,
                "latents": latents,
                "model": model_kind,
                "replicate": rep,
                "recall": scores.recall,
                "precision": scores.precision,
                "f1": scores.f1,
                "recall_after_filter": after.recall,
                "precision_after_filter": after.precision,
                "accuracy": accuracy(model, test),
                "truth_size": len(truth),
                "found_size": len(found),
                "retained_size": len(retained),
                "epsilon_used": report.epsilon,
                "undefined_rows": int(
                    sum(r.undefined_rows for r in report.records)
                ),
                "fp_parent_of_proxy": fp_counts[FpKind.PARENT_OF_PROXY.value],
                "fp_shared_latent_ancestor": fp_counts[
                    FpKind.SHARED_LATENT_ANCESTOR.value
                ],
                "fp_inducing_path": fp_counts[FpKind.INDUCING_PATH.value],
                "fp_unexplained": fp_counts[FpKind.UNEXPLAINED.value],
            }
        )
    return rows


def run_inducing_replicate(
    nodes: int, density: float, latents: int, rep: int, spec: ExperimentSpec
) -> list[dict]:
    """Does this random masked DAG contain a non-causal feature with an
    inducing path (strict or relaxed) to the outcome?"""
    seeds = replicate_seeds(spec.seed, nodes, density, latents, rep)
    config = GenConfig(
        total_nodes=nodes,
        edge_ratio=density,
        latent_count=latents,
        latent_mode=LatentMode.CONNECTED_ONLY if latents else LatentMode.NONE,
        seed=seeds["dag"],
    )
    dag = generate_dag(config)
    masked = mask_latents(dag, replace(config, seed=seeds["mask"]))
    roles = classify_roles(masked)
    other = [
        n
        for n in masked.observed_features
        if roles[n].kind is RoleKind.OTHER
    ]
    strict = inducing_reachable(masked, relaxed=False)
    relaxed = inducing_reachable(masked, relaxed=True)
    strict_hit = any(n in strict for n in other)
    relaxed_hit = any(n in relaxed for n in other)
    return [
        {
            "key": _row_key(
                ExperimentKind.INDUCING_PATH_COUNT, nodes, density, latents,
                "graph", rep,
            ),
            "kind": ExperimentKind.INDUCING_PATH_COUNT.value,
            "nodes": nodes,
            "density": density,
            "latents": latents,
            "model": "graph",
            "replicate": rep,
            "other_feature_count": len(other),
            "strict_hit": bool(strict_hit),
            "relaxed_hit": bool(relaxed_hit),
            "hit": bool(strict_hit or relaxed_hit),
        }
    ]


def _row_key(kind, nodes, density, latents, model, rep) -> str:
    return f"{kind.value}/n{nodes}/d{_density_key(density)}/l{latents}/{model}/r{rep}"


# --- semisynthetic -------------------------------------------------------------


def encoded_column_variables(dnet: DiscreteNet, outcome_var: str) -> list[str]:
    """Source variable of every one-hot column, in encoding order."""
    out_idx = dnet.index_of(outcome_var)
    owners: list[str] = []
    for node, var in enumerate(dnet.variable_names):
        if node == out_idx:
            continue
        owners.extend([var] * dnet.net.cards[node])
    return owners


def _semi_summary(rows: list[dict]) -> list[dict]:
    return [
        {
            "model": r["model"],
            "accuracy": r["accuracy"],
            "truth_in_top10_amie": sum(
                1 for e in r["amie_ranking"][:10] if e["direct_cause_group"]
            ),
            "truth_in_top10_importance": sum(
                1 for e in r["importance_ranking"][:10] if e["direct_cause_group"]
            ),
        }
        for r in rows
    ]


def run_semisynthetic(spec: ExperimentSpec, sink: Optional["ResultSink"] = None) -> "ExperimentResult":
    """Sample a parsed network, encode, train, and rank features by
    average intervention effect next to each model's own importances."""
    from .synth import sample_codes

    dnet = load_bif(spec.bif_path)
    if spec.outcome_var is None:
        raise DataError("semisynthetic runs need an outcome variable name")
    out_idx = dnet.index_of(spec.outcome_var)

    expected = spec.reference_counts
    counts_note = {
        "actual_nodes": dnet.node_count,
        "actual_edges": dnet.edge_count,
        "expected_nodes": expected[0] if expected else None,
        "expected_edges": expected[1] if expected else None,
        "counts_match": (
            None
            if expected is None
            else bool((dnet.node_count, dnet.edge_count) == tuple(expected))
        ),
    }

    seeds = replicate_seeds(spec.seed, dnet.node_count, 0.0, 0, 0)
    codes = sample_codes(dnet.net, spec.sample_size, seeds["sample"])
    positive = list(spec.positive_levels)
    if not positive:
        positive = [most_frequent_level(dnet, codes, spec.outcome_var)]
    data = one_hot_encode(dnet, codes, spec.outcome_var, positive)
    data = split(data, spec.train_fraction, seeds["split"])
    train, test = data.train_view(), data.test_view()

    truth_vars = set(dnet.parents_of(spec.outcome_var))
    owners = encoded_column_variables(dnet, spec.outcome_var)

    rows = []
    for model_kind in spec.models:
        if model_kind == "oracle":
            raise DataError("semisynthetic runs support logreg and rf models")
        model = _fit_model(model_kind, train, dnet.net, seeds["model"])
        values, _ = amie_values(model, test)
        amie_rank = _ranking_table(values, data.feature_names, owners, truth_vars)
        if model_kind == "logreg":
            imp_values = np.abs(model.weights)
            imp_name = "coefficient"
        else:
            imp_values = permutation_importance(
                model, test, repeats=5, seed=seeds["model"]
            )
            imp_name = "permutation_importance"
        imp_rank = _ranking_table(
            imp_values, data.feature_names, owners, truth_vars
        )
        rows.append(
            {
                "key": f"semisynthetic/{model_kind}",
                "kind": ExperimentKind.SEMI_SYNTHETIC.value,
                "model": model_kind,
                "replicate": 0,
                "accuracy": accuracy(model, test),
                "positive_levels": positive,
                "outcome_var": spec.outcome_var,
                "importance_measure": imp_name,
                "amie_ranking": amie_rank,
                "importance_ranking": imp_rank,
                "counts": counts_note,
                "feature_count": data.feature_count,
                "direct_cause_variables": sorted(truth_vars),
                "model_summary": model.summary(),
            }
        )
        if sink is not None and rows[-1]["key"] not in sink.done:
            sink.append(rows[-1])
    return ExperimentResult(spec=spec, rows=rows, summary=_semi_summary(rows))


def _ranking_table(values, names, owners, truth_vars) -> list[dict]:
    order = sorted(range(len(names)), key=lambda i: (-abs(float(values[i])), i))
    return [
        {
            "rank": pos + 1,
            "feature": names[i],
            "value": float(values[i]),
            "variable": owners[i],
            "direct_cause_group": owners[i] in truth_vars,
        }
        for pos, i in enumerate(order)
    ]


# --- grid runner, sink, aggregation --------------------------------------------


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[dict]
    summary: list[dict] = field(default_factory=list)

    def cell_rows(self, **filters) -> list[dict]:
        out = []
        for row in self.rows:
            if all(row.get(k) == v for k, v in filters.items()):
                out.append(row)
        return out


class ResultSink:
    """Appends one JSON row per finished replicate; reloads them to resume.

    A provenance file pins the spec fingerprint; resuming against a
    different spec is refused rather than silently mixed.
    """

    def __init__(self, out_dir: str, spec: ExperimentSpec):
        self.out_dir = out_dir
        self.spec = spec
        os.makedirs(out_dir, exist_ok=True)
        self.rows_path = os.path.join(out_dir, "rows.jsonl")
        self.provenance_path = os.path.join(out_dir, "provenance.json")
        self.done: dict[str, dict] = {}
        self._prepare()

    def _prepare(self) -> None:
        provenance = {
            "schema_version": RESULT_SCHEMA_VERSION,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "spec": self.spec.to_dict(),
            "spec_fingerprint": self.spec.fingerprint(),
        }
        if os.path.exists(self.provenance_path):
            with open(self.provenance_path) as handle:
                existing = json.load(handle)
            if existing.get("spec_fingerprint") != provenance["spec_fingerprint"]:
                raise DataError(
                    f"{self.out_dir} holds results for a different run "
                    "configuration; use a fresh output directory"
                )
        else:
            with open(self.provenance_path, "w") as handle:
                json.dump(provenance, handle, sort_keys=True, indent=2)
                handle.write("\n")
        if os.path.exists(self.rows_path):
            kept: list[str] = []
            with open(self.rows_path) as handle:
                for line in handle:
                    try:
                        row = json.loads(line)
                    except json.JSONDecodeError:
                        break  # truncated tail from an interrupted write
                    self.done[row["key"]] = row
                    kept.append(line if line.endswith("\n") else line + "\n")
            with open(self.rows_path, "w") as handle:
                handle.writelines(kept)

    def append(self, row: dict) -> None:
        with open(self.rows_path, "a") as handle:
            handle.write(json.dumps(row, sort_keys=True) + "\n")
            handle.flush()
        self.done[row["key"]] = row


def run_experiment(
    spec: ExperimentSpec,
    out_dir: Optional[str] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> ExperimentResult:
    """Run (or resume) every cell of a grid experiment."""
    if spec.kind is ExperimentKind.SEMI_SYNTHETIC:
        sink = ResultSink(out_dir, spec) if out_dir else None
        needed = [f"semisynthetic/{m}" for m in spec.models]
        if sink is not None and all(k in sink.done for k in needed):
            rows = [sink.done[k] for k in needed]
            return ExperimentResult(spec=spec, rows=rows, summary=_semi_summary(rows))
        return run_semisynthetic(spec, sink=sink)

    sink = ResultSink(out_dir, spec) if out_dir else None
    latents_grid = (
        (0,) if spec.kind is ExperimentKind.NO_LATENT else spec.latents
    )
    rows: list[dict] = []
    for nodes in spec.nodes:
        for density in spec.densities:
            for latents in latents_grid:
                for rep in range(spec.replicates):
                    rows.extend(
                        _run_or_reuse(
                            spec, nodes, density, latents, rep, sink, progress
                        )
                    )
    summary = aggregate_rows(spec, rows)
    return ExperimentResult(spec=spec, rows=rows, summary=summary)


def _run_or_reuse(spec, nodes, density, latents, rep, sink, progress) -> list[dict]:
    models = (
        ("graph",)
        if spec.kind is ExperimentKind.INDUCING_PATH_COUNT
        else spec.models
    )
    keys = [
        _row_key(spec.kind, nodes, density, latents, model, rep)
        for model in models
    ]
    if sink is not None and all(k in sink.done for k in keys):
        return [sink.done[k] for k in keys]
    if spec.kind is ExperimentKind.INDUCING_PATH_COUNT:
        produced = run_inducing_replicate(nodes, density, latents, rep, spec)
    else:
        produced = run_synthetic_replicate(
            spec.kind, nodes, density, latents, rep, spec
        )
    if sink is not None:
        for row in produced:
            sink.append(row)
    if progress is not None:
        progress(keys[0])
    return produced


def aggregate_rows(spec: ExperimentSpec, rows: list[dict]) -> list[dict]:
    """Per-cell mean/std summaries, recomputable from the stored rows."""
    if spec.kind is ExperimentKind.SEMI_SYNTHETIC:
        return []
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["nodes"], row["density"], row["latents"], row["model"])
        cells.setdefault(key, []).append(row)
    summary = []
    for (nodes, density, latents, model), cell in sorted(cells.items()):
        entry: dict = {
            "nodes": nodes,
            "density": density,
            "latents": latents,
            "model": model,
            "replicates": len(cell),
            "single_replicate": len(cell) == 1,
        }
        if spec.kind is ExperimentKind.INDUCING_PATH_COUNT:
            entry["dag_count"] = len(cell)
            entry["hit_count"] = int(sum(r["hit"] for r in cell))
            entry["strict_hit_count"] = int(sum(r["strict_hit"] for r in cell))
            entry["relaxed_hit_count"] = int(sum(r["relaxed_hit"] for r in cell))
        else:
            for metric in (
                "recall",
                "precision",
                "recall_after_filter",
                "precision_after_filter",
                "accuracy",
            ):
                values = np.asarray([r[metric] for r in cell], dtype=np.float64)
                entry[f"mean_{metric}"] = float(values.mean())
                entry[f"std_{metric}"] = float(values.std())
            for counter in (
                "fp_parent_of_proxy",
                "fp_shared_latent_ancestor",
                "fp_inducing_path",
                "fp_unexplained",
            ):
                entry[counter] = int(sum(r[counter] for r in cell))
        summary.append(entry)
    return summary


def check_result_consistency(result: ExperimentResult) -> None:
    """Recompute the summary from the rows and compare; raises on drift."""
    fresh = aggregate_rows(result.spec, result.rows)
    if len(fresh) != len(result.summary):
        raise InvariantError("summary cell count does not match the rows")
    for left, right in zip(fresh, result.summary):
        for key, value in left.items():
            other = right.get(key)
            if isinstance(value, float):
                if not math.isclose(value, other, rel_tol=0, abs_tol=1e-12):
                    raise InvariantError(
                        f"summary field {key} drifted: {value} vs {other}"
                    )
            elif value != other:
                raise InvariantError(
                    f"summary field {key} drifted: {value} vs {other}"
                )


def write_summary(
    result: ExperimentResult, out_dir: str, formats: Iterable[str] = ("csv",)
) -> list[str]:
    """Write the per-cell summary table; returns the paths written."""
    import csv as _csv

    paths = []
    os.makedirs(out_dir, exist_ok=True)
    for fmt in formats:
        path = os.path.join(out_dir, f"summary.{fmt}")
        if fmt == "json":
            with open(path, "w") as handle:
                json.dump(
                    {
                        "schema_version": RESULT_SCHEMA_VERSION,
                        "spec": result.spec.to_dict(),
                        "cells": result.summary,
                    },
                    handle,
                    sort_keys=True,
                    indent=2,
                )
                handle.write("\n")
        elif fmt == "csv":
            with open(path, "w", newline="") as handle:
                if not result.summary:
                    handle.write("")
                    paths.append(path)
                    continue
                columns = list(result.summary[0].keys())
                writer = _csv.writer(handle, lineterminator="\n")
                writer.writerow(columns)
                for entry in result.summary:
                    writer.writerow(
                        [
                            repr(v) if isinstance(v, float) else v
                            for v in (entry.get(c) for c in columns)
                        ]
                    )
        else:
            raise ValueError(f"unknown format {fmt!r}")
        paths.append(path)
    return paths


def write_rankings(result: ExperimentResult, out_dir: str,
                   formats: Iterable[str] = ("csv",)) -> list[str]:
    """Write semisynthetic ranking tables, one pair of files per model."""
    import csv as _csv

    paths = []
    os.makedirs(out_dir, exist_ok=True)
    for row in result.rows:
        for table_name, prefix in (
            ("amie_ranking", "amie_rank"),
            ("importance_ranking", "importance_rank"),
        ):
            table = row[table_name]
            stem = f"{prefix}_{row['model']}"
            for fmt in formats:
                path = os.path.join(out_dir, f"{stem}.{fmt}")
                if fmt == "json":
                    with open(path, "w") as handle:
                        json.dump(
                            {
                                "schema_version": RESULT_SCHEMA_VERSION,
                                "model": row["model"],
                                "accuracy": row["accuracy"],
                                "entries": table,
                            },
                            handle,
                            sort_keys=True,
                            indent=2,
                        )
                        handle.write("\n")
                else:
                    with open(path, "w", newline="") as handle:
                        writer = _csv.writer(handle, lineterminator="\n")
                        writer.writerow(
                            ["rank", "feature", "value", "variable",
                             "direct_cause_group"]
                        )
                        for entry in table:
                            writer.writerow(
                                [
                                    entry["rank"],
                                    entry["feature"],
                                    repr(entry["value"]),
                                    entry["variable"],
                                    int(entry["direct_cause_group"]),
                                ]
                            )
                paths.append(path)
    return paths


def _run_kind(spec: ExperimentSpec, kind: ExperimentKind, out_dir=None):
    if spec.kind is not kind:
        raise ValueError(f"spec kind must be {kind.value}")
    return run_experiment(spec, out_dir=out_dir)


def run_no_latent(spec: ExperimentSpec, out_dir=None) -> ExperimentResult:
    return _run_kind(spec, ExperimentKind.NO_LATENT, out_dir)


def run_connected_latent(spec: ExperimentSpec, out_dir=None) -> ExperimentResult:
    return _run_kind(spec, ExperimentKind.CONNECTED_LATENT, out_dir)


def run_standalone_latent(spec: ExperimentSpec, out_dir=None) -> ExperimentResult:
    return _run_kind(spec, ExperimentKind.STANDALONE_LATENT, out_dir)


def count_inducing_paths(spec: ExperimentSpec, out_dir=None) -> ExperimentResult:
    return _run_kind(spec, ExperimentKind.INDUCING_PATH_COUNT, out_dir)


# --- canonical latent structures (independence-screen studies) ------------------


def parent_of_proxy_graph() -> CausalDag:
    """X_j -> X_i <- U -> Y with U latent: X_i proxies the latent direct
    cause and X_j, its parent, is marginally independent of Y."""
    return make_dag(
        4, edges=[(0, 1), (2, 1), (2, 3)], outcome=3, latent=[2],
        labels=("Xj", "Xi", "U", "Y"),
    )


def confounded_proxy_graph() -> CausalDag:
    """X_j <- U_j -> X_i <- U_i -> Y: X_j shares the latent ancestor U_j
    with the proxy X_i and is marginally independent of Y."""
    return make_dag(
        5, edges=[(1, 0), (1, 2), (3, 2), (3, 4)], outcome=4, latent=[1, 3],
        labels=("Xj", "Uj", "Xi", "Ui", "Y"),
    )


def collider_cause_graph() -> CausalDag:
    """X_j -> X_m <- U -> Y with X_m -> Y: the collider X_m is a cause of
    the outcome, giving X_j an inducing path and a real marginal
    dependence on Y."""
    return make_dag(
        4, edges=[(0, 1), (2, 1), (2, 3), (1, 3)], outcome=3, latent=[2],
        labels=("Xj", "Xm", "U", "Y"),
    )


def relaxed_collider_graph() -> CausalDag:
    """X_j -> X_m <- U -> Y without X_m -> Y: the collider is not an
    ancestor of the outcome but shares the latent ancestor U with it,
    the relaxed inducing-path pattern."""
    return make_dag(
        4, edges=[(0, 1), (2, 1), (2, 3)], outcome=3, latent=[2],
        labels=("Xj", "Xm", "U", "Y"),
    )


def _world_config(dag: CausalDag, seed: int, min_effect: float = 0.2) -> GenConfig:
    return GenConfig(
        total_nodes=dag.node_count,
        edge_ratio=max(len(dag.edges), 1) / dag.node_count,
        cpt_margin=0.1,
        min_effect=min_effect,
        seed=seed,
    )


def collider_cause_net(seed: int, min_marginal: float = 0.05) -> BayesNet:
    """Parameterised collider-cause world whose exact marginal effect of
    X_j on the outcome is at least ``min_marginal``, so the dependence the
    screen must detect is quantifiably present."""
    dag = collider_cause_graph()
    for attempt in range(1000):
        net = random_cpts(dag, _world_config(dag, seed + 7919 * attempt))
        p1 = reference.exact_conditional_outcome(net, [0], [1])
        p0 = reference.exact_conditional_outcome(net, [0], [0])
        if abs(p1 - p0) >= min_marginal:
            return net
    raise InvariantError("could not reach the requested marginal dependence")


def independence_screen_study(
    n_worlds: int = 100,
    sample_size: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
) -> dict:
    """Behaviour of the marginal chi-square screen on the canonical
    structures: the spurious feature should be screened out where it is
    marginally independent of the outcome, and kept where a collider
    cause makes the dependence real."""
    filtered = {"parent_of_proxy": 0, "confounded_proxy": 0}
    retained_collider = 0
    for k in range(n_worlds):
        for s_idx, (name, graph) in enumerate(
            (
                ("parent_of_proxy", parent_of_proxy_graph()),
                ("confounded_proxy", confounded_proxy_graph()),
            )
        ):
            net_seed, samp_seed = (
                int(s)
                for s in np.random.SeedSequence([seed, k, s_idx]).generate_state(
                    2, np.uint64
                )
            )
            net = random_cpts(graph, _world_config(graph, net_seed))
            data = sample(net, sample_size, seed=samp_seed)
            outcome = independence_filter(data, {0}, alpha=alpha)
            if 0 in outcome.filtered:
                filtered[name] += 1
        net_seed, samp_seed = (
            int(s)
            for s in np.random.SeedSequence([seed, k, 2]).generate_state(2, np.uint64)
        )
        net = collider_cause_net(net_seed)
        data = sample(net, sample_size, seed=samp_seed)
        outcome = independence_filter(data, {0}, alpha=alpha)
        if 0 not in outcome.filtered:
            retained_collider += 1
    return {
        "worlds": n_worlds,
        "alpha": alpha,
        "filtered_parent_of_proxy": filtered["parent_of_proxy"],
        "filtered_confounded_proxy": filtered["confounded_proxy"],
        "retained_collider_cause": retained_collider,
    }


# --- verification suites --------------------------------------------------------


def graph_oracle_check(
    n_graphs: int = 1000,
    max_nodes: int = 10,
    seed: int = 0,
    dsep_queries: int = 5,
) -> dict:
    """Compare the traversal algorithms against literal path enumeration
    on random DAGs; returns disagreement counts (all should be zero)."""
    rng = np.random.default_rng(seed)
    dsep_checked = dsep_disagree = 0
    ind_checked = ind_disagree = 0
    witness_bad = 0
    for k in range(n_graphs):
        n = int(rng.integers(4, max_nodes + 1))
        ratio = float(rng.uniform(0.8, 2.0))
        config = GenConfig(
            total_nodes=n,
            edge_ratio=min(ratio, (n - 1) / 2.0),
            seed=int(rng.integers(0, 2**63)),
        )
        dag = generate_dag(config)
        flags = rng.random(n) < 0.3
        flags[dag.outcome] = False
        latent = [i for i in range(n) if flags[i]]
        dag = make_dag(n, dag.edges, outcome=dag.outcome, latent=latent)

        nodes = list(range(n))
        for _ in range(dsep_queries):
            x, y = rng.choice(nodes, size=2, replace=False)
            rest = [v for v in nodes if v not in (x, y)]
            z_size = int(rng.integers(0, len(rest) + 1))
            z = list(rng.choice(rest, size=z_size, replace=False)) if z_size else []
            fast = d_separated(dag, int(x), int(y), [int(v) for v in z])
            slow = reference.d_separated_by_enumeration(
                dag, int(x), int(y), [int(v) for v in z]
            )
            dsep_checked += 1
            dsep_disagree += fast != slow

        batch = {"strict": inducing_reachable(dag, relaxed=False),
                 "relaxed": inducing_reachable(dag, relaxed=True)}
        for x in dag.observed_features:
            for mode, relaxed in (("strict", False), ("relaxed", True)):
                witness = has_inducing_path(dag, x, relaxed=relaxed)
                slow_path = reference.inducing_path_by_enumeration(
                    dag, x, relaxed=relaxed
                )
                ind_checked += 1
                if (witness is None) != (slow_path is None):
                    ind_disagree += 1
                if (x in batch[mode]) != (witness is not None):
                    ind_disagree += 1
                if witness is not None and not reference.check_inducing_path(
                    dag, list(witness.nodes), relaxed
                ):
                    witness_bad += 1
    return {
        "graphs": n_graphs,
        "dsep_checked": dsep_checked,
        "dsep_disagreements": dsep_disagree,
        "inducing_checked": ind_checked,
        "inducing_disagreements": ind_disagree,
        "invalid_witnesses": witness_bad,
    }


def chi_square_calibration(
    n_sims: int = 10_000, n_rows: int = 1000, alpha: float = 0.05, seed: int = 0
) -> dict:
    """Rejection rate of the chi-square screen under true independence."""
    rng = np.random.default_rng(seed)
    probs = np.array([0.25, 0.25, 0.25, 0.25])
    tables = rng.multinomial(n_rows, probs, size=n_sims)
    rejected = 0
    degenerate = 0
    for a, b, c, d in tables:
        result = chi_square_2x2(int(a), int(b), int(c), int(d))
        if result.degenerate:
            degenerate += 1
        elif result.p_value <= alpha:
            rejected += 1
    return {
        "simulations": n_sims,
        "rows": n_rows,
        "alpha": alpha,
        "rejection_rate": rejected / n_sims,
        "degenerate": degenerate,
    }


def direct_cause_recovery_check(
    n_nets: int = 50,
    node_range: tuple[int, int] = (8, 12),
    densities: tuple[float, ...] = (1.0, 2.0),
    eval_rows: int = 2000,
    epsilon: float = 1e-9,
    seed: int = 0,
) -> dict:
    """Exact-model recovery on fully observed random worlds: the non-zero
    average-effect set should equal the outcome's parent set."""
    rng = np.random.default_rng(seed)
    exact = 0
    for k in range(n_nets):
        n = int(rng.integers(node_range[0], node_range[1] + 1))
        density = float(densities[int(rng.integers(0, len(densities)))])
        config = GenConfig(
            total_nodes=n,
            edge_ratio=density,
            cpt_margin=0.1,
            min_effect=0.05,
            seed=int(rng.integers(0, 2**63)),
        )
        dag = generate_dag(config)
        net = random_cpts(dag, replace(config, seed=int(rng.integers(0, 2**63))))
        data = sample(net, eval_rows, seed=int(rng.integers(0, 2**63)))
        model = oracle_model(net)
        values, _ = amie_values(model, data)
        found = nonzero_set(values, epsilon)
        truth = _truth_columns(dag, ExperimentKind.NO_LATENT)
        exact += found == truth
    return {"nets": n_nets, "exact_recoveries": exact, "rate": exact / n_nets}


def sampling_consistency_check(seed: int = 0, rows: int = 100_000) -> dict:
    """Empirical conditionals of a sampled world against its tables."""
    config = GenConfig(total_nodes=6, edge_ratio=1.5, seed=seed)
    dag = generate_dag(config)
    net = random_cpts(dag, replace(config, seed=seed + 1))
    from .synth import sample_codes

    codes = sample_codes(net, rows, seed + 2)
    worst = 0.0
    for node in range(dag.node_count):
        parents = dag.parents[node]
        idx = np.zeros(rows, dtype=np.int64)
        for p, stride in zip(parents, net.parent_strides(node)):
            idx += codes[:, p] * stride
        table = net.prob_one(node)
        for row in range(table.size):
            hits = idx == row
            count = int(hits.sum())
            if count < 50:
                continue
            emp = float(codes[hits, node].mean())
            sigma = math.sqrt(table[row] * (1 - table[row]) / count)
            worst = max(worst, abs(emp - table[row]) / max(sigma, 1e-12))
    return {"rows": rows, "worst_sigma_distance": worst}


def verify_all(fast: bool = True, seed: int = 0) -> list[tuple[str, bool, str]]:
    """The property suites behind the ``verify`` CLI subcommand."""
    n_graphs = 200 if fast else 1000
    n_sims = 2000 if fast else 10_000
    n_nets = 15 if fast else 50
    checks: list[tuple[str, bool, str]] = []

    graph = graph_oracle_check(n_graphs=n_graphs, seed=seed)
    ok = (
        graph["dsep_disagreements"] == 0
        and graph["inducing_disagreements"] == 0
        and graph["invalid_witnesses"] == 0
    )
    checks.append(("graph-oracle-equivalence", ok, json.dumps(graph, sort_keys=True)))

    calib = chi_square_calibration(n_sims=n_sims, seed=seed)
    ok = abs(calib["rejection_rate"] - calib["alpha"]) <= 0.02
    checks.append(("chi-square-calibration", ok, json.dumps(calib, sort_keys=True)))

    recovery = direct_cause_recovery_check(n_nets=n_nets, seed=seed)
    ok = recovery["rate"] >= 0.95
    checks.append(("direct-cause-recovery", ok, json.dumps(recovery, sort_keys=True)))

    sampling = sampling_consistency_check(seed=seed)
    ok = sampling["worst_sigma_distance"] <= 5.0
    checks.append(("sampling-consistency", ok, json.dumps(sampling, sort_keys=True)))

    screen = independence_screen_study(n_worlds=30 if fast else 100, seed=seed)
    ok = (
        screen["filtered_parent_of_proxy"] >= 0.85 * screen["worlds"]
        and screen["filtered_confounded_proxy"] >= 0.85 * screen["worlds"]
        and screen["retained_collider_cause"] >= 0.85 * screen["worlds"]
    )
    checks.append(("independence-screen", ok, json.dumps(screen, sort_keys=True)))
    return checks
