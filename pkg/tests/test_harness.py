import json
import os

import pytest

from amie.cli import main
from amie.dataset import DataError
from amie.harness import (
    ExperimentKind,
    ExperimentSpec,
    InvariantError,
    check_result_consistency,
    collider_cause_net,
    count_inducing_paths,
    full_scale,
    independence_screen_study,
    replicate_seeds,
    run_experiment,
    run_no_latent,
    write_rankings,
    write_summary,
)
from amie import reference

TINY = dict(
    nodes=(10,), densities=(1.5,), replicates=3, sample_size=400,
    models=("logreg",), seed=5,
)


def tiny_spec(kind=ExperimentKind.NO_LATENT, **overrides):
    params = dict(TINY)
    params.update(overrides)
    return ExperimentSpec(kind=kind, **params)


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


class TestSpec:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(kind=ExperimentKind.NO_LATENT, nodes=())
        with pytest.raises(ValueError):
            ExperimentSpec(kind=ExperimentKind.NO_LATENT, replicates=0)
        with pytest.raises(ValueError):
            ExperimentSpec(kind=ExperimentKind.NO_LATENT, models=("svm",))
        with pytest.raises(ValueError):
            ExperimentSpec(kind=ExperimentKind.SEMI_SYNTHETIC)

    def test_fingerprint_tracks_content(self):
        a = tiny_spec()
        b = tiny_spec(seed=6)
        assert a.fingerprint() != b.fingerprint()
        assert a.fingerprint() == tiny_spec().fingerprint()

    def test_full_scale_grids(self):
        spec = full_scale(tiny_spec(kind=ExperimentKind.CONNECTED_LATENT))
        assert spec.nodes == (40, 60, 80)
        assert spec.densities == (2.0, 4.0, 6.0)
        assert spec.replicates == 100


class TestSeeds:
    def test_deterministic(self):
        assert replicate_seeds(0, 40, 2.0, 2, 3) == replicate_seeds(0, 40, 2.0, 2, 3)

    def test_latent_count_shares_base_world(self):
        a = replicate_seeds(0, 40, 2.0, 2, 3)
        b = replicate_seeds(0, 40, 2.0, 6, 3)
        assert a == b

    def test_distinct_across_replicates_and_cells(self):
        seen = set()
        for nodes in (10, 20):
            for rep in range(5):
                seen.add(replicate_seeds(0, nodes, 2.0, 0, rep)["dag"])
        assert len(seen) == 10


class TestRunExperiment:
    def test_rows_and_summary(self, tmp_path):
        result = run_experiment(tiny_spec(), out_dir=str(tmp_path))
        assert len(result.rows) == 3
        assert len(result.summary) == 1
        cell = result.summary[0]
        assert cell["replicates"] == 3
        assert 0.0 <= cell["mean_recall"] <= 1.0
        check_result_consistency(result)
        assert (tmp_path / "rows.jsonl").exists()
        assert (tmp_path / "provenance.json").exists()

    def test_single_replicate_flag(self):
        result = run_experiment(tiny_spec(replicates=1))
        assert result.summary[0]["single_replicate"] is True
        assert result.summary[0]["std_recall"] == 0.0

    def test_summary_drift_detected(self):
        result = run_experiment(tiny_spec())
        result.summary[0]["mean_recall"] += 0.25
        with pytest.raises(InvariantError):
            check_result_consistency(result)

    def test_resume_skips_completed_rows(self, tmp_path):
        spec = tiny_spec()
        first = run_experiment(spec, out_dir=str(tmp_path))
        rows_path = tmp_path / "rows.jsonl"
        before = read_bytes(rows_path)

        # drop the last row plus a truncated fragment, as a crash would leave
        lines = before.decode().splitlines()
        with open(rows_path, "w") as handle:
            handle.write("\n".join(lines[:-1]) + "\n")
            handle.write('{"key": "half written')
        resumed = run_experiment(spec, out_dir=str(tmp_path))
        assert read_bytes(rows_path) == before
        assert [r["key"] for r in resumed.rows] == [r["key"] for r in first.rows]
        assert resumed.summary == first.summary

    def test_resume_refuses_other_spec(self, tmp_path):
        run_experiment(tiny_spec(), out_dir=str(tmp_path))
        with pytest.raises(DataError, match="different run"):
            run_experiment(tiny_spec(seed=9), out_dir=str(tmp_path))

    def test_byte_identical_reruns(self, tmp_path):
        spec = tiny_spec()
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        result_a = run_experiment(spec, out_dir=str(dir_a))
        result_b = run_experiment(spec, out_dir=str(dir_b))
        write_summary(result_a, str(dir_a), formats=("csv", "json"))
        write_summary(result_b, str(dir_b), formats=("csv", "json"))
        for name in ("rows.jsonl", "provenance.json", "summary.csv", "summary.json"):
            assert read_bytes(dir_a / name) == read_bytes(dir_b / name)

    def test_connected_latent_rows_carry_case_counts(self):
        spec = tiny_spec(
            kind=ExperimentKind.CONNECTED_LATENT, latents=(2,), replicates=2
        )
        result = run_experiment(spec)
        for row in result.rows:
            for key in (
                "fp_parent_of_proxy", "fp_shared_latent_ancestor",
                "fp_inducing_path", "fp_unexplained",
                "recall_after_filter", "precision_after_filter",
            ):
                assert key in row

    def test_standalone_with_zero_latents_matches_no_latent(self):
        plain = run_experiment(tiny_spec()).rows
        degenerate = run_experiment(
            tiny_spec(kind=ExperimentKind.STANDALONE_LATENT, latents=(0,))
        ).rows
        for a, b in zip(plain, degenerate):
            assert a["recall"] == b["recall"]
            assert a["accuracy"] == b["accuracy"]
            assert a["found_size"] == b["found_size"]

    def test_inducing_count_zero_without_latents(self):
        spec = ExperimentSpec(
            kind=ExperimentKind.INDUCING_PATH_COUNT,
            nodes=(12,), densities=(2.0,), latents=(0,),
            replicates=25, seed=3,
        )
        result = run_experiment(spec)
        assert result.summary[0]["hit_count"] == 0

    def test_inducing_count_finds_cases_with_latents(self):
        spec = ExperimentSpec(
            kind=ExperimentKind.INDUCING_PATH_COUNT,
            nodes=(20,), densities=(2.0,), latents=(4,),
            replicates=40, seed=3,
        )
        result = count_inducing_paths(spec)
        assert 0 <= result.summary[0]["hit_count"] <= 40

    def test_named_runners_check_the_kind(self):
        assert run_no_latent(tiny_spec()).rows
        with pytest.raises(ValueError, match="kind"):
            run_no_latent(tiny_spec(kind=ExperimentKind.CONNECTED_LATENT, latents=(2,)))

    def test_inducing_count_sparse_anchor_cell(self):
        # the reference table reports 2 hits per 100 masked DAGs here;
        # generator differences get slack up to 10
        spec = ExperimentSpec(
            kind=ExperimentKind.INDUCING_PATH_COUNT,
            nodes=(80,), densities=(2.0,), latents=(2,), replicates=100, seed=0,
        )
        result = count_inducing_paths(spec)
        assert result.summary[0]["hit_count"] <= 10

    def test_inducing_count_grows_with_latent_count(self):
        spec = ExperimentSpec(
            kind=ExperimentKind.INDUCING_PATH_COUNT,
            nodes=(40,), densities=(2.0,), latents=(2, 4, 6),
            replicates=100, seed=0,
        )
        result = count_inducing_paths(spec)
        counts = {c["latents"]: c["hit_count"] for c in result.summary}
        assert counts[2] <= counts[4] <= counts[6]


class TestSemisynthetic:
    def test_water_run(self, tmp_path, water_path):
        spec = ExperimentSpec(
            kind=ExperimentKind.SEMI_SYNTHETIC,
            sample_size=3000, models=("logreg",), seed=1,
            bif_path=water_path, outcome_var="CNOD_12_45",
            reference_counts=(32, 66),
        )
        result = run_experiment(spec, out_dir=str(tmp_path))
        row = result.rows[0]
        assert row["counts"]["counts_match"] is True
        assert row["direct_cause_variables"] == [
            "CBODD_12_30", "CNOD_12_30", "CNON_12_30",
        ]
        ranking = row["amie_ranking"]
        assert [e["rank"] for e in ranking] == list(range(1, len(ranking) + 1))
        paths = write_rankings(result, str(tmp_path))
        assert any(p.endswith("amie_rank_logreg.csv") for p in paths)
        for path in paths:
            assert os.path.getsize(path) > 0

    def test_resume_reuses_rows(self, tmp_path, water_path):
        spec = ExperimentSpec(
            kind=ExperimentKind.SEMI_SYNTHETIC,
            sample_size=1500, models=("logreg",), seed=1,
            bif_path=water_path, outcome_var="CNOD_12_45",
        )
        first = run_experiment(spec, out_dir=str(tmp_path))
        before = read_bytes(tmp_path / "rows.jsonl")
        again = run_experiment(spec, out_dir=str(tmp_path))
        assert read_bytes(tmp_path / "rows.jsonl") == before
        assert again.rows == first.rows

    def test_oracle_not_supported(self, water_path):
        spec = ExperimentSpec(
            kind=ExperimentKind.SEMI_SYNTHETIC,
            sample_size=500, models=("oracle",), seed=1,
            bif_path=water_path, outcome_var="CNOD_12_45",
        )
        with pytest.raises(DataError, match="logreg and rf"):
            run_experiment(spec)


class TestScreenStudyWorlds:
    def test_collider_world_has_requested_marginal(self):
        net = collider_cause_net(seed=3, min_marginal=0.05)
        p1 = reference.exact_conditional_outcome(net, [0], [1])
        p0 = reference.exact_conditional_outcome(net, [0], [0])
        assert abs(p1 - p0) >= 0.05

    def test_small_study_behaves(self):
        study = independence_screen_study(n_worlds=10, sample_size=4000, seed=2)
        assert study["filtered_parent_of_proxy"] >= 8
        assert study["filtered_confounded_proxy"] >= 8
        assert study["retained_collider_cause"] >= 8


class TestCli:
    def test_gen_writes_world(self, tmp_path, capsys):
        out = tmp_path / "world"
        code = main([
            "gen", "--nodes", "8", "--density", "1.5", "--samples", "200",
            "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        from amie.graphs import graph_from_text
        from amie.synth import net_from_text

        dag = graph_from_text((out / "dag.txt").read_text())
        assert dag.node_count == 8
        net = net_from_text((out / "net.txt").read_text())
        assert net.dag.edges == dag.edges
        assert (out / "data.csv").read_text().splitlines()[0].endswith(",Y")

    def test_no_latent_command(self, tmp_path, capsys):
        code = main([
            "no-latent", "--nodes", "8", "--density", "1.5",
            "--replicates", "2", "--samples", "300", "--model", "logreg",
            "--seed", "4", "--out", str(tmp_path / "res"),
        ])
        assert code == 0
        printed = capsys.readouterr().out
        assert "mean_recall" in printed
        assert (tmp_path / "res" / "summary.csv").exists()

    def test_explain_command(self, tmp_path):
        world = tmp_path / "w"
        main(["gen", "--nodes", "6", "--density", "1.2", "--samples", "400",
              "--seed", "5", "--out", str(world)])
        out = tmp_path / "report"
        code = main([
            "explain", "--data", str(world / "data.csv"), "--model", "logreg",
            "--seed", "1", "--out", str(out), "--format", "json",
        ])
        assert code == 0
        payload = json.loads((out / "report.json").read_text())
        assert payload["schema_version"] == 1

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as err:
            main(["no-latent", "--bogus-flag"])
        assert err.value.code == 1

    def test_data_error_exit_code(self, capsys):
        code = main(["explain", "--data", "/nonexistent/file.csv"])
        assert code == 2

    def test_semisynthetic_custom_needs_outcome(self, tmp_path, capsys):
        code = main(["semisynthetic", "--bif", str(tmp_path / "missing.bif")])
        assert code == 2

    def test_config_file_defaults_and_overrides(self, tmp_path, capsys):
        config = tmp_path / "run.conf"
        config.write_text("nodes=8\ndensity=1.5\nreplicates=2\nsamples=250\nmodel=logreg\nseed=11\n")
        code = main([
            "no-latent", "--config", str(config), "--replicates", "1",
        ])
        assert code == 0
        printed = capsys.readouterr().out
        cell = json.loads(printed.strip().splitlines()[-1])
        assert cell["nodes"] == 8
        assert cell["replicates"] == 1  # flag beats the config file
