"""Acceptance suite: one test per release criterion, printing one
PASS/FAIL line each.  Heavy experiment runs are shared through
module-scoped fixtures.
"""

import sys
import time

import numpy as np
import pytest

from amie.harness import (
    ExperimentKind,
    ExperimentSpec,
    chi_square_calibration,
    direct_cause_recovery_check,
    graph_oracle_check,
    independence_screen_study,
    run_experiment,
    write_rankings,
    write_summary,
)
from amie.stats import chi_square_2x2


def _report(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'} {name}: {detail}"
    # write past pytest's capture so the per-criterion verdicts always
    # land in the console record
    print(line, file=sys.__stdout__, flush=True)
    assert passed, line


def _paired_wins(rows, model, metric="recall"):
    by_rep = {}
    for row in rows:
        if row["model"] != model:
            continue
        by_rep.setdefault(row["replicate"], {})[row["latents"]] = row[metric]
    wins = total = 0
    for rep_values in by_rep.values():
        if 2 in rep_values and 6 in rep_values:
            total += 1
            wins += rep_values[6] <= rep_values[2]
    return wins, total


def _cell_mean(rows, metric, **filters):
    values = [
        row[metric]
        for row in rows
        if all(row.get(k) == v for k, v in filters.items())
    ]
    return float(np.mean(values))


@pytest.fixture(scope="module")
def no_latent_run():
    spec = ExperimentSpec(
        kind=ExperimentKind.NO_LATENT,
        nodes=(40,), densities=(2.0,), replicates=10,
        sample_size=10_000, models=("logreg", "rf"), seed=0,
    )
    start = time.monotonic()
    result = run_experiment(spec)
    return result, time.monotonic() - start


@pytest.fixture(scope="module")
def connected_run():
    spec = ExperimentSpec(
        kind=ExperimentKind.CONNECTED_LATENT,
        nodes=(40,), densities=(2.0,), latents=(2, 6), replicates=10,
        sample_size=10_000, models=("logreg", "rf", "oracle"), seed=0,
    )
    return run_experiment(spec)


def test_criterion_1_exact_model_recovery():
    start = time.monotonic()
    outcome = direct_cause_recovery_check(
        n_nets=50, node_range=(8, 12), densities=(1.0, 2.0),
        eval_rows=2000, epsilon=1e-9, seed=101,
    )
    elapsed = time.monotonic() - start
    _report(
        1, "exact-model non-zero set equals the parent set",
        outcome["rate"] >= 0.95 and elapsed < 120,
        f"rate={outcome['rate']:.2f} (need >= 0.95), runtime={elapsed:.1f}s (< 120s)",
    )


def test_criterion_2_no_latent_desk_reproduction(no_latent_run):
    result, elapsed = no_latent_run
    recalls = {
        model: _cell_mean(result.rows, "recall", model=model)
        for model in ("logreg", "rf")
    }
    passed = all(r >= 0.90 for r in recalls.values()) and elapsed < 600
    _report(
        2, "fully observed recovery at desk scale",
        passed,
        f"mean recall logreg={recalls['logreg']:.3f} rf={recalls['rf']:.3f} "
        f"(need >= 0.90), runtime={elapsed:.0f}s (< 600s)",
    )


def test_criterion_3_connected_latent_desk_reproduction(connected_run):
    rows = connected_run.rows
    details = []
    passed = True
    for model in ("logreg", "rf"):
        recall_l2 = _cell_mean(rows, "recall", model=model, latents=2)
        wins, total = _paired_wins(rows, model)
        passed = passed and recall_l2 >= 0.85 and wins >= 7 and total == 10
        details.append(f"{model}: recall@l2={recall_l2:.3f} paired={wins}/{total}")
    _report(
        3, "latent worlds keep high recovery and degrade with more latents",
        passed, "; ".join(details) + " (need recall >= 0.85, wins >= 7/10)",
    )


def test_criterion_4_standalone_latent_risk():
    spec = ExperimentSpec(
        kind=ExperimentKind.STANDALONE_LATENT,
        nodes=(40,), densities=(4.0,), latents=(2, 6), replicates=10,
        sample_size=10_000, models=("logreg",), seed=0,
    )
    result = run_experiment(spec)
    acc2 = _cell_mean(result.rows, "accuracy", latents=2)
    acc6 = _cell_mean(result.rows, "accuracy", latents=6)
    rec2 = _cell_mean(result.rows, "recall", latents=2)
    rec6 = _cell_mean(result.rows, "recall", latents=6)
    _report(
        4, "standalone latent causes hurt accuracy and recovery together",
        acc2 > acc6 and rec2 > rec6,
        f"accuracy {acc2:.3f} -> {acc6:.3f}, recall {rec2:.3f} -> {rec6:.3f} "
        "(both must strictly decrease)",
    )


def test_criterion_5_false_positive_exhaustiveness(connected_run):
    oracle_rows = [r for r in connected_run.rows if r["model"] == "oracle"]
    unexplained = sum(r["fp_unexplained"] for r in oracle_rows)
    flagged = sum(
        r["fp_parent_of_proxy"] + r["fp_shared_latent_ancestor"]
        + r["fp_inducing_path"] for r in oracle_rows
    )
    _report(
        5, "every exact-model false positive has a structural case",
        len(oracle_rows) == 20 and unexplained == 0,
        f"{len(oracle_rows)} oracle replicates, {flagged} classified false "
        f"positives, {unexplained} unexplained (need 0)",
    )


def test_filter_improves_precision_on_flagged_replicates(connected_run):
    # supporting check, not a numbered criterion: where the exact model
    # flags parent-of-proxy or shared-ancestor features, the marginal
    # screen should not hurt precision on average
    rows = [
        r for r in connected_run.rows
        if r["model"] == "oracle"
        and r["fp_parent_of_proxy"] + r["fp_shared_latent_ancestor"] > 0
    ]
    assert rows, "expected some replicates with screenable false positives"
    before = np.mean([r["precision"] for r in rows])
    after = np.mean([r["precision_after_filter"] for r in rows])
    assert after >= before


def test_criterion_6_independence_screen():
    study = independence_screen_study(
        n_worlds=100, sample_size=10_000, alpha=0.05, seed=13
    )
    passed = (
        study["filtered_parent_of_proxy"] >= 90
        and study["filtered_confounded_proxy"] >= 90
        and study["retained_collider_cause"] >= 90
    )
    _report(
        6, "marginal screen removes spurious flags and keeps real dependence",
        passed,
        f"filtered parent-of-proxy {study['filtered_parent_of_proxy']}/100, "
        f"confounded {study['filtered_confounded_proxy']}/100, retained "
        f"collider-cause {study['retained_collider_cause']}/100 (need >= 90)",
    )


def test_criterion_7_inducing_path_frequency():
    # Known red: the per-cell bound encodes the reference table's scale,
    # but a structural count of inducing-path configurations genuinely
    # grows with graph density under this generator (the traversal itself
    # matches literal path enumeration, see criterion 8).  The sparse
    # anchor cell, the monotone latent trend and the latent-free zero
    # cells all hold; the dense cells exceed the bound.
    spec = ExperimentSpec(
        kind=ExperimentKind.INDUCING_PATH_COUNT,
        nodes=(40, 60, 80), densities=(2.0, 4.0, 6.0), latents=(0, 2, 4, 6),
        replicates=100, seed=0,
    )
    result = run_experiment(spec)
    worst = 0
    zero_ok = True
    cells = []
    for cell in result.summary:
        if cell["latents"] == 0:
            zero_ok = zero_ok and cell["hit_count"] == 0
        else:
            worst = max(worst, cell["hit_count"])
            cells.append(
                f"n{cell['nodes']}/d{cell['density']:g}/l{cell['latents']}"
                f"={cell['hit_count']}"
            )
    _report(
        7, "inducing paths stay rare in random masked graphs",
        worst <= 20 and zero_ok,
        f"max hits per 100 DAGs = {worst} (need <= 20), latent-free cells "
        f"zero = {zero_ok}; per cell: {', '.join(cells)}",
    )


def test_criterion_8_graph_oracle_equivalence():
    outcome = graph_oracle_check(n_graphs=1000, max_nodes=10, seed=8)
    passed = (
        outcome["dsep_disagreements"] == 0
        and outcome["inducing_disagreements"] == 0
        and outcome["invalid_witnesses"] == 0
    )
    _report(
        8, "traversals agree with path enumeration",
        passed,
        f"{outcome['dsep_checked']} separation queries and "
        f"{outcome['inducing_checked']} inducing queries over 1000 DAGs, "
        f"disagreements={outcome['dsep_disagreements']}+"
        f"{outcome['inducing_disagreements']}, "
        f"bad witnesses={outcome['invalid_witnesses']} (need all zero)",
    )


def test_criterion_9_chi_square_calibration():
    calib = chi_square_calibration(n_sims=10_000, n_rows=1000, alpha=0.05, seed=9)
    fixture = chi_square_2x2(30, 10, 10, 30)
    passed = (
        abs(calib["rejection_rate"] - 0.05) <= 0.02
        and abs(fixture.statistic - 20.0) <= 1e-9
        and abs(fixture.p_value - 7.7e-6) <= 0.10 * 7.7e-6
    )
    _report(
        9, "chi-square screen is calibrated",
        passed,
        f"rejection rate={calib['rejection_rate']:.4f} (0.05 +/- 0.02), "
        f"fixture stat={fixture.statistic}, p={fixture.p_value:.3g}",
    )


def test_criterion_10_benchmark_network_ranking(insurance_path):
    spec = ExperimentSpec(
        kind=ExperimentKind.SEMI_SYNTHETIC,
        sample_size=20_000, models=("logreg",), seed=0,
        bif_path=insurance_path, outcome_var="ThisCarCost",
        reference_counts=(26, 50),
    )
    result = run_experiment(spec)
    row = result.rows[0]
    top10 = row["amie_ranking"][:10]
    truth_hits = sum(e["direct_cause_group"] for e in top10)
    top3_vars = [e["variable"] for e in top10[:3]]
    counts = row["counts"]
    mismatch_logged = counts["counts_match"] is not None
    passed = truth_hits >= 4 and all(v == "ThisCarDam" for v in top3_vars)
    _report(
        10, "benchmark-network ranking surfaces the true direct causes",
        passed and mismatch_logged,
        f"direct-cause columns in top-10 = {truth_hits} (need >= 4), top-3 "
        f"variables = {top3_vars} (need all ThisCarDam); parsed "
        f"{counts['actual_nodes']}/{counts['actual_edges']} vs reference "
        f"{counts['expected_nodes']}/{counts['expected_edges']} "
        f"(match={counts['counts_match']}, logged and not fatal)",
    )


def test_criterion_11_byte_identical_reruns(tmp_path, insurance_path):
    def files_equal(dir_a, dir_b, names):
        for name in names:
            with open(dir_a / name, "rb") as fa, open(dir_b / name, "rb") as fb:
                if fa.read() != fb.read():
                    return False
        return True

    checks = []

    synthetic = ExperimentSpec(
        kind=ExperimentKind.NO_LATENT,
        nodes=(10,), densities=(1.5,), replicates=3,
        sample_size=500, models=("logreg",), seed=5,
    )
    dirs = (tmp_path / "syn_a", tmp_path / "syn_b")
    for d in dirs:
        write_summary(run_experiment(synthetic, out_dir=str(d)), str(d),
                      formats=("csv", "json"))
    checks.append(
        files_equal(*dirs, ["rows.jsonl", "provenance.json", "summary.csv",
                            "summary.json"])
    )

    inducing = ExperimentSpec(
        kind=ExperimentKind.INDUCING_PATH_COUNT,
        nodes=(20,), densities=(2.0,), latents=(2,), replicates=20, seed=5,
    )
    dirs = (tmp_path / "ind_a", tmp_path / "ind_b")
    for d in dirs:
        write_summary(run_experiment(inducing, out_dir=str(d)), str(d),
                      formats=("csv",))
    checks.append(files_equal(*dirs, ["rows.jsonl", "summary.csv"]))

    semi = ExperimentSpec(
        kind=ExperimentKind.SEMI_SYNTHETIC,
        sample_size=2000, models=("logreg",), seed=5,
        bif_path=insurance_path, outcome_var="ThisCarCost",
        reference_counts=(26, 50),
    )
    dirs = (tmp_path / "semi_a", tmp_path / "semi_b")
    for d in dirs:
        write_rankings(run_experiment(semi, out_dir=str(d)), str(d),
                       formats=("csv",))
    checks.append(
        files_equal(*dirs, ["rows.jsonl", "amie_rank_logreg.csv",
                            "importance_rank_logreg.csv"])
    )

    _report(
        11, "identical seeds give byte-identical result files",
        all(checks),
        f"synthetic={checks[0]}, inducing-count={checks[1]}, "
        f"semisynthetic={checks[2]}",
    )
