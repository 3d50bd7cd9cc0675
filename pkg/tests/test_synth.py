import math

import numpy as np
import pytest

from amie import reference
from amie.graphs import RoleKind, classify_roles, make_dag
from amie.synth import (
    BayesNet,
    GenConfig,
    LatentMode,
    binary_net,
    generate_dag,
    mask_latents,
    net_from_text,
    net_to_text,
    oracle_model,
    random_cpts,
    sample,
    sample_codes,
)


class TestGenConfig:
    def test_capacity_error(self):
        # 4 nodes admit 6 forward pairs; d=6 asks for 24 edges
        with pytest.raises(ValueError, match="edge budget"):
            GenConfig(total_nodes=4, edge_ratio=6.0)

    def test_margin_effect_interaction(self):
        with pytest.raises(ValueError, match="below 0.5"):
            GenConfig(total_nodes=5, edge_ratio=1.0, cpt_margin=0.3, min_effect=0.25)

    def test_margin_range(self):
        with pytest.raises(ValueError):
            GenConfig(total_nodes=5, edge_ratio=1.0, cpt_margin=0.6)


class TestGenerateDag:
    def test_edge_count_and_outcome(self):
        config = GenConfig(total_nodes=5, edge_ratio=1.0, seed=3)
        dag = generate_dag(config)
        assert len(dag.edges) == 5
        assert dag.outcome == 4
        assert all(u != 4 for u, _ in dag.edges)
        assert len(dag.parents[4]) >= 1

    def test_deterministic(self):
        config = GenConfig(total_nodes=12, edge_ratio=2.0, seed=99)
        assert generate_dag(config).edges == generate_dag(config).edges

    def test_forward_orientation(self):
        for seed in range(10):
            dag = generate_dag(GenConfig(total_nodes=8, edge_ratio=1.5, seed=seed))
            assert all(u < v for u, v in dag.edges)


class TestMaskLatents:
    def test_none_mode_is_identity(self):
        config = GenConfig(total_nodes=6, edge_ratio=1.0, seed=1)
        dag = generate_dag(config)
        assert mask_latents(dag, config) is dag

    def test_standalone_augments_graph(self):
        config = GenConfig(
            total_nodes=5, edge_ratio=1.0, latent_count=2,
            latent_mode=LatentMode.STANDALONE_DC, seed=2,
        )
        dag = generate_dag(config)
        masked = mask_latents(dag, config)
        assert masked.node_count == 7
        assert masked.outcome == dag.outcome
        for extra in (5, 6):
            assert not masked.observed[extra]
            assert masked.children[extra] == (dag.outcome,)
            assert masked.parents[extra] == ()
        roles = classify_roles(masked)
        assert roles[5].kind is RoleKind.STANDALONE_LATENT_CAUSE

    def test_connected_mode_never_leaves_standalone_causes(self):
        for seed in range(25):
            config = GenConfig(
                total_nodes=12, edge_ratio=1.5, latent_count=3,
                latent_mode=LatentMode.CONNECTED_ONLY, seed=seed,
            )
            masked = mask_latents(generate_dag(config), config)
            assert sum(not flag for flag in masked.observed) == 3
            roles = classify_roles(masked)
            assert not any(
                r.kind is RoleKind.STANDALONE_LATENT_CAUSE for r in roles.values()
            )

    def test_latent_count_bound(self):
        config = GenConfig(
            total_nodes=4, edge_ratio=1.0, latent_count=3,
            latent_mode=LatentMode.CONNECTED_ONLY, seed=0,
        )
        with pytest.raises(ValueError, match="observed feature"):
            mask_latents(generate_dag(config), config)


class TestRandomCpts:
    def test_root_row_within_margin(self):
        config = GenConfig(total_nodes=3, edge_ratio=0.5, seed=4, cpt_margin=0.2)
        dag = make_dag(3, [(0, 2)])
        net = random_cpts(dag, config)
        root_p = net.prob_one(1)
        assert root_p.shape == (1,)
        assert 0.2 <= root_p[0] <= 0.8

    def test_table_sizes(self):
        dag = make_dag(5, [(0, 3), (1, 3), (2, 3), (0, 4)], outcome=4)
        config = GenConfig(total_nodes=5, edge_ratio=0.8, seed=5)
        net = random_cpts(dag, config)
        assert net.tables[3].shape == (8, 2)
        assert net.tables[0].shape == (1, 2)

    def test_min_effect_enforced(self):
        dag = make_dag(6, [(0, 5), (1, 5), (2, 5), (3, 5), (4, 5)], outcome=5)
        config = GenConfig(total_nodes=6, edge_ratio=0.9, min_effect=0.05, seed=6)
        net = random_cpts(dag, config)
        p = net.prob_one(5)
        for j in range(5):
            bit = 1 << j
            low = np.array([r for r in range(p.size) if not r & bit])
            assert np.max(np.abs(p[low] - p[low + bit])) >= 0.05

    def test_deterministic(self):
        config = GenConfig(total_nodes=8, edge_ratio=1.5, seed=7)
        dag = generate_dag(config)
        one = random_cpts(dag, config)
        two = random_cpts(dag, config)
        assert all(np.array_equal(a, b) for a, b in zip(one.tables, two.tables))


class TestBayesNetValidation:
    def test_row_sum_enforced(self):
        dag = make_dag(2, [(0, 1)])
        with pytest.raises(ValueError, match="sum to 1"):
            BayesNet(
                dag=dag, cards=(2, 2),
                tables=(
                    np.array([[0.5, 0.6]]),
                    np.array([[0.5, 0.5], [0.5, 0.5]]),
                ),
            )

    def test_shape_enforced(self):
        dag = make_dag(2, [(0, 1)])
        with pytest.raises(ValueError, match="shape"):
            BayesNet(
                dag=dag, cards=(2, 2),
                tables=(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])),
            )


class TestSampling:
    def test_deterministic_column(self):
        dag = make_dag(2, [(0, 1)])
        net = binary_net(dag, [np.array([1.0]), np.array([0.5, 0.5])])
        codes = sample_codes(net, 200, seed=0)
        assert (codes[:, 0] == 1).all()

    def test_binomial_convergence(self):
        dag = make_dag(2, [(0, 1)])
        net = binary_net(dag, [np.array([0.3]), np.array([0.5, 0.5])])
        data = sample(net, 100_000, seed=1)
        # binomial standard error at n=100000 is 0.00145; 3.3 sigma = 0.005
        assert abs(data.features[:, 0].mean() - 0.3) <= 0.005

    def test_latent_columns_dropped(self):
        config = GenConfig(
            total_nodes=8, edge_ratio=1.5, latent_count=2,
            latent_mode=LatentMode.CONNECTED_ONLY, seed=8,
        )
        masked = mask_latents(generate_dag(config), config)
        net = random_cpts(masked, config)
        data = sample(net, 50, seed=2)
        assert data.feature_count == 8 - 1 - 2
        assert sample_codes(net, 50, seed=2).shape == (50, 8)

    def test_empirical_conditionals_match_tables(self):
        config = GenConfig(total_nodes=6, edge_ratio=1.5, seed=9)
        dag = generate_dag(config)
        net = random_cpts(dag, config)
        codes = sample_codes(net, 60_000, seed=3)
        for node in range(dag.node_count):
            parents = dag.parents[node]
            idx = np.zeros(codes.shape[0], dtype=np.int64)
            for p, stride in zip(parents, net.parent_strides(node)):
                idx += codes[:, p] * stride
            table = net.prob_one(node)
            for row in range(table.size):
                hits = idx == row
                count = int(hits.sum())
                if count < 200:
                    continue
                emp = codes[hits, node].mean()
                sigma = math.sqrt(table[row] * (1 - table[row]) / count)
                assert abs(emp - table[row]) <= 5 * sigma

    def test_deterministic(self):
        config = GenConfig(total_nodes=7, edge_ratio=1.5, seed=10)
        net = random_cpts(generate_dag(config), config)
        a = sample(net, 500, seed=11)
        b = sample(net, 500, seed=11)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.outcome, b.outcome)


class TestOracleModel:
    def test_direct_table_read(self):
        dag = make_dag(2, [(0, 1)])
        net = binary_net(dag, [np.array([0.5]), np.array([0.2, 0.9])])
        model = oracle_model(net)
        assert model.predict([1]) == pytest.approx(0.9, abs=1e-12)
        assert model.predict([0]) == pytest.approx(0.2, abs=1e-12)

    def test_latent_marginalization(self):
        # U -> X, U -> Y with U hidden: P(y | x) averages over u
        dag = make_dag(3, [(0, 1), (0, 2)], outcome=2, latent=[0])
        net = binary_net(
            dag,
            [np.array([0.6]), np.array([0.2, 0.9]), np.array([0.3, 0.8])],
        )
        model = oracle_model(net)
        # hand enumeration: P(u=1, x=1) = .6*.9, P(u=0, x=1) = .4*.2
        # P(y | x=1) = (.8*.54 + .3*.08) / (.54 + .08)
        assert model.predict([1]) == pytest.approx(0.456 / 0.62, abs=1e-12)
        assert model.predict([0]) == pytest.approx(0.144 / 0.38, abs=1e-12)
        assert model.predict([1]) == pytest.approx(
            reference.exact_conditional_outcome(net, [1], [1]), abs=1e-12
        )

    def test_impossible_configuration_is_nan(self):
        # X1 copies X0 exactly, so (x0=0, x1=1) has probability zero
        dag = make_dag(3, [(0, 1), (0, 2)], outcome=2)
        net = binary_net(
            dag,
            [np.array([0.5]), np.array([0.0, 1.0]), np.array([0.3, 0.8])],
        )
        model = oracle_model(net)
        assert math.isnan(model.predict([0, 1]))
        assert model.predict([1, 1]) == pytest.approx(0.8)

    def test_multi_level_outcome_rejected(self):
        dag = make_dag(2, [(0, 1)])
        tables = (
            np.array([[0.5, 0.5]]),
            np.array([[0.2, 0.3, 0.5], [0.1, 0.2, 0.7]]),
        )
        net = BayesNet(dag=dag, cards=(2, 3), tables=tables)
        with pytest.raises(ValueError, match="binary outcome"):
            oracle_model(net)


class TestFaithfulnessSanity:
    def test_exact_independence_matches_d_separation(self):
        from amie.graphs import d_separated

        rng = np.random.default_rng(12)
        agree = total = 0
        for _ in range(25):
            config = GenConfig(
                total_nodes=int(rng.integers(4, 9)),
                edge_ratio=1.2,
                cpt_margin=0.1,
                min_effect=0.05,
                seed=int(rng.integers(0, 2**63)),
            )
            dag = generate_dag(config)
            net = random_cpts(dag, config)
            nodes = list(range(dag.node_count))
            for _ in range(12):
                x, y = (int(v) for v in rng.choice(nodes, size=2, replace=False))
                rest = [v for v in nodes if v not in (x, y)]
                size = int(rng.integers(0, min(len(rest), 3) + 1))
                z = [int(v) for v in rng.choice(rest, size=size, replace=False)]
                total += 1
                agree += d_separated(dag, x, y, z) == reference.exact_independent(
                    net, x, y, z, tol=1e-6
                )
        assert agree / total >= 0.99

    def test_standalone_latents_lower_attainable_accuracy(self):
        gaps = []
        for seed in range(20):
            base = GenConfig(total_nodes=8, edge_ratio=1.5, seed=seed)
            dag = generate_dag(base)
            plain = random_cpts(dag, base)
            grown = GenConfig(
                total_nodes=8, edge_ratio=1.5, latent_count=3,
                latent_mode=LatentMode.STANDALONE_DC, seed=seed,
            )
            masked = mask_latents(dag, grown)
            noisy = random_cpts(masked, grown)
            gaps.append(
                reference.attainable_accuracy(plain)
                - reference.attainable_accuracy(noisy)
            )
        assert np.mean(gaps) > 0
        assert sum(g >= 0 for g in gaps) >= 15


class TestNetSerialization:
    def test_round_trip(self):
        config = GenConfig(
            total_nodes=7, edge_ratio=1.5, latent_count=2,
            latent_mode=LatentMode.CONNECTED_ONLY, seed=13,
        )
        masked = mask_latents(generate_dag(config), config)
        net = random_cpts(masked, config)
        again = net_from_text(net_to_text(net))
        assert again.dag.edges == net.dag.edges
        assert again.dag.observed == net.dag.observed
        assert all(np.array_equal(a, b) for a, b in zip(again.tables, net.tables))

    def test_multi_level_rejected(self):
        dag = make_dag(2, [(0, 1)])
        tables = (
            np.array([[0.5, 0.5]]),
            np.array([[0.2, 0.3, 0.5], [0.1, 0.2, 0.7]]),
        )
        net = BayesNet(dag=dag, cards=(2, 3), tables=tables)
        with pytest.raises(ValueError, match="binary"):
            net_to_text(net)

    def test_missing_rows_rejected(self):
        with pytest.raises(ValueError, match="missing cpt"):
            net_from_text(
                "nodes 2 outcome 1\nflags obs obs\nedge 0 1\ncpt 0 0 0.5\ncpt 1 0 0.2\n"
            )
