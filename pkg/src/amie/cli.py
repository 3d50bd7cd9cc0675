"""Command-line entry point.

Subcommands mirror the experiment kinds plus world generation, one-off
explanation of a CSV dataset, and the verification suites:

    amie gen             write a random world (graph, net, dataset)
    amie no-latent       fully observed recovery study
    amie connected-latent  latent worlds without standalone direct causes
    amie standalone      standalone latent direct-cause risk study
    amie inducing-count  inducing-path frequency over random masked DAGs
    amie semisynthetic   benchmark-network ranking study
    amie explain         attribution report for a dataset CSV
    amie verify          run the property suites

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
failure.  Flags override values from an optional key=value config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from importlib import resources
from typing import Optional

from .dataset import DataError, from_csv, split, to_csv
from .explain import build_report, report_to_csv, report_to_json
from .graphs import GraphError, graph_to_text
from .harness import (
    REFERENCE_NETWORK_COUNTS,
    ExperimentKind,
    ExperimentSpec,
    InvariantError,
    check_result_consistency,
    full_scale,
    run_experiment,
    verify_all,
    write_rankings,
    write_summary,
)
from .learners import ForestParams, LogRegParams, fit_forest, fit_logreg
from .synth import (
    GenConfig,
    LatentMode,
    generate_dag,
    mask_latents,
    net_to_text,
    random_cpts,
    sample,
)

USAGE_EXIT, DATA_EXIT, INTERNAL_EXIT = 1, 2, 3

_LATENT_MODES = {mode.value: mode for mode in LatentMode}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_common(parser: argparse.ArgumentParser, grids: bool = True) -> None:
    if grids:
        parser.add_argument("--nodes", type=_int_list, default=(40,),
                            help="comma list of node counts")
        parser.add_argument("--density", type=_float_list, default=(2.0,),
                            help="comma list of edge/node ratios")
        parser.add_argument("--latents", type=_int_list, default=(2,),
                            help="comma list of hidden-node counts")
    parser.add_argument("--replicates", type=int, default=10)
    parser.add_argument("--samples", type=int, default=10_000)
    parser.add_argument("--model", default="logreg,rf",
                        help="comma list: logreg, rf, oracle")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="non-zero threshold; default depends on the model")
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--train-frac", type=float, default=0.7)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--full", action="store_true",
                        help="run the full-scale grid instead of desk scale")


def build_parser() -> _Parser:
    parser = _Parser(prog="amie", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", default=None,
                        help="key=value file; flags given explicitly win")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write one random world to --out")
    gen.add_argument("--nodes", type=int, default=10)
    gen.add_argument("--density", type=float, default=2.0)
    gen.add_argument("--latents", type=int, default=0)
    gen.add_argument("--latent-mode", choices=sorted(_LATENT_MODES),
                     default="none")
    gen.add_argument("--samples", type=int, default=10_000)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    for name, help_text in (
        ("no-latent", "recovery of direct causes in fully observed worlds"),
        ("connected-latent", "latent worlds without standalone direct causes"),
        ("standalone", "standalone latent direct-cause risk study"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    sub.choices["standalone"].set_defaults(density=(4.0,))

    ind = sub.add_parser("inducing-count",
                         help="inducing-path frequency over random masked DAGs")
    _add_common(ind)
    ind.set_defaults(replicates=100, model="")

    semi = sub.add_parser("semisynthetic", help="benchmark-network rankings")
    semi.add_argument("--bif", default="insurance",
                      help="path to a BIF file, or a bundled name "
                           "(insurance, water)")
    semi.add_argument("--outcome-var", default=None,
                      help="outcome variable (defaults per bundled network)")
    semi.add_argument("--positive-levels", default=None,
                      help="comma list of outcome levels mapped to class 1; "
                           "default: most frequent level vs rest")
    semi.add_argument("--samples", type=int, default=20_000)
    semi.add_argument("--model", default="logreg,rf")
    semi.add_argument("--epsilon", type=float, default=None)
    semi.add_argument("--alpha", type=float, default=0.05)
    semi.add_argument("--train-frac", type=float, default=0.7)
    semi.add_argument("--seed", type=int, default=0)
    semi.add_argument("--out", default=None)
    semi.add_argument("--format", choices=("csv", "json"), default="csv")

    explain = sub.add_parser("explain", help="report on a dataset CSV")
    explain.add_argument("--data", required=True, help="CSV with a header row")
    explain.add_argument("--outcome-col", default="Y")
    explain.add_argument("--model", choices=("logreg", "rf"), default="logreg")
    explain.add_argument("--epsilon", type=float, default=None)
    explain.add_argument("--alpha", type=float, default=0.05)
    explain.add_argument("--train-frac", type=float, default=0.7)
    explain.add_argument("--seed", type=int, default=0)
    explain.add_argument("--out", default=None)
    explain.add_argument("--format", choices=("csv", "json"), default="csv")

    verify = sub.add_parser("verify", help="run the property suites")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--full", action="store_true",
                        help="full-size suites (slower)")
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    probe = _Parser(add_help=False)
    probe.add_argument("--config", default=None)
    found, remaining = probe.parse_known_args(argv)
    if found.config:
        try:
            with open(found.config) as handle:
                lines = handle.readlines()
        except OSError as exc:
            print(f"amie: cannot read config: {exc}", file=sys.stderr)
            raise SystemExit(DATA_EXIT) from None
        extra: list[str] = []
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                print(f"amie: bad config line: {line!r}", file=sys.stderr)
                raise SystemExit(DATA_EXIT)
            key, value = (part.strip() for part in line.split("=", 1))
            extra.append(f"--{key.replace('_', '-')}")
            if value.lower() != "true":
                extra.append(value)
        # config-derived flags go right after the subcommand so explicit
        # flags, parsed later, override them
        if not remaining:
            print("amie: --config requires a subcommand", file=sys.stderr)
            raise SystemExit(USAGE_EXIT)
        argv = [remaining[0]] + extra + remaining[1:]
    return parser.parse_args(argv)


def _bundled_bif(name: str) -> Optional[str]:
    candidate = resources.files("amie").joinpath("data", f"{name}.bif")
    return str(candidate) if candidate.is_file() else None


_DEFAULT_OUTCOMES = {"insurance": "ThisCarCost", "water": "CNOD_12_45"}


def _resolve_network(args) -> tuple[str, str, Optional[tuple[int, int]]]:
    name = args.bif.lower()
    if name in REFERENCE_NETWORK_COUNTS:
        path = _bundled_bif(name)
        if path is None:
            raise DataError(f"bundled network {name!r} is missing")
        outcome = args.outcome_var or _DEFAULT_OUTCOMES[name]
        return path, outcome, REFERENCE_NETWORK_COUNTS[name]
    if args.outcome_var is None:
        raise DataError("--outcome-var is required for a custom BIF file")
    return args.bif, args.outcome_var, None


def _models(text: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in text.split(",") if m.strip())


_KIND_FOR_COMMAND = {
    "no-latent": ExperimentKind.NO_LATENT,
    "connected-latent": ExperimentKind.CONNECTED_LATENT,
    "standalone": ExperimentKind.STANDALONE_LATENT,
    "inducing-count": ExperimentKind.INDUCING_PATH_COUNT,
}


def _run_grid_command(args) -> int:
    spec = ExperimentSpec(
        kind=_KIND_FOR_COMMAND[args.command],
        nodes=args.nodes,
        densities=args.density,
        latents=args.latents,
        replicates=args.replicates,
        sample_size=args.samples,
        models=_models(args.model) or ("logreg",),
        epsilon=args.epsilon,
        alpha=args.alpha,
        train_fraction=args.train_frac,
        seed=args.seed,
    )
    if args.full:
        spec = full_scale(spec)
    result = run_experiment(spec, out_dir=args.out)
    check_result_consistency(result)
    if args.out:
        paths = write_summary(result, args.out, formats=(args.format,))
        print(f"wrote {', '.join(paths)}")
    for cell in result.summary:
        print(json.dumps(cell, sort_keys=True))
    return 0


def _run_gen(args) -> int:
    config = GenConfig(
        total_nodes=args.nodes,
        edge_ratio=args.density,
        latent_count=args.latents,
        latent_mode=_LATENT_MODES[args.latent_mode],
        seed=args.seed,
    )
    dag = generate_dag(config)
    masked = mask_latents(dag, replace(config, seed=config.seed + 1))
    net = random_cpts(masked, replace(config, seed=config.seed + 2))
    data = sample(net, args.samples, args.seed + 3)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "dag.txt"), "w") as handle:
        handle.write(graph_to_text(masked))
    with open(os.path.join(args.out, "net.txt"), "w") as handle:
        handle.write(net_to_text(net))
    to_csv(data, os.path.join(args.out, "data.csv"))
    print(f"wrote dag.txt, net.txt, data.csv to {args.out}")
    return 0


def _run_semisynthetic(args) -> int:
    path, outcome_var, reference_counts = _resolve_network(args)
    positive = tuple(
        v.strip() for v in (args.positive_levels or "").split(",") if v.strip()
    )
    spec = ExperimentSpec(
        kind=ExperimentKind.SEMI_SYNTHETIC,
        replicates=1,
        sample_size=args.samples,
        models=_models(args.model) or ("logreg",),
        epsilon=args.epsilon,
        alpha=args.alpha,
        train_fraction=args.train_frac,
        seed=args.seed,
        bif_path=path,
        outcome_var=outcome_var,
        positive_levels=positive,
        reference_counts=reference_counts,
    )
    result = run_experiment(spec, out_dir=args.out)
    counts = result.rows[0]["counts"]
    if counts["counts_match"] is False:
        print(
            "note: parsed network has "
            f"{counts['actual_nodes']} nodes / {counts['actual_edges']} edges; "
            f"reference counts are {counts['expected_nodes']} / "
            f"{counts['expected_edges']}"
        )
    if args.out:
        paths = write_rankings(result, args.out, formats=(args.format,))
        print(f"wrote {', '.join(paths)}")
    for row in result.rows:
        top = [e["feature"] for e in row["amie_ranking"][:10]]
        print(f"{row['model']}: accuracy={row['accuracy']:.4f} top10={top}")
    return 0


def _run_explain(args) -> int:
    data = from_csv(args.data, outcome_name=args.outcome_col)
    data = split(data, args.train_frac, args.seed)
    train, test = data.train_view(), data.test_view()
    if args.model == "logreg":
        model = fit_logreg(train, LogRegParams())
    else:
        model = fit_forest(train, ForestParams(seed=args.seed))
    report = build_report(model, test, epsilon=args.epsilon, alpha=args.alpha)
    rendered = (
        report_to_json(report) if args.format == "json" else report_to_csv(report)
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"report.{args.format}")
        with open(path, "w") as handle:
            handle.write(rendered)
        print(f"wrote {path}")
    else:
        print(rendered, end="")
    return 0


def _run_verify(args) -> int:
    failures = 0
    for name, passed, detail in verify_all(fast=not args.full, seed=args.seed):
        status = "PASS" if passed else "FAIL"
        print(f"{status} {name}: {detail}")
        failures += not passed
    return 0 if failures == 0 else INTERNAL_EXIT


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        if args.command == "gen":
            return _run_gen(args)
        if args.command in _KIND_FOR_COMMAND:
            return _run_grid_command(args)
        if args.command == "semisynthetic":
            return _run_semisynthetic(args)
        if args.command == "explain":
            return _run_explain(args)
        if args.command == "verify":
            return _run_verify(args)
        parser.error(f"unknown command {args.command!r}")
    except (DataError, GraphError, FileNotFoundError) as exc:
        print(f"amie: data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except InvariantError as exc:
        print(f"amie: invariant failure: {exc}", file=sys.stderr)
        return INTERNAL_EXIT
    except ValueError as exc:
        print(f"amie: {exc}", file=sys.stderr)
        return DATA_EXIT
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
