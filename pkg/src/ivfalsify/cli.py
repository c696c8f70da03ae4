"""Command-line interface.

Subcommands: ``graph check``, ``simulate``, ``test``, ``diagnose``,
``suite``, ``scenarios list``.  Exit codes: 0 success / no rejection,
2 falsification-relevant rejection, 3 computation error, 64 usage error,
74 unreadable or malformed input file.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import __version__
from .battery import (
    SUITE_TESTS,
    BatteryError,
    TestPlan,
    gam_nci_test,
    gam_nco_test,
    nc_diagnostics,
    nci_test,
    nci_test_unconditional,
    nco_test_joint,
    nco_test_single,
    reset_test,
    run_suite,
)
from .data import DataError, Dataset
from .graphs import GraphError, parse_graph
from .qualify import (
    check_iv_graphical,
    check_nci,
    check_nco,
    qualify_nci,
    qualify_nco,
)
from .regression import RegressionError
from .scenarios import list_scenarios, register_scenario_config, scenario
from .scm import ScmError, sample
from .splines import SplineError

EXIT_OK = 0
EXIT_REJECT = 2
EXIT_ERROR = 3
EXIT_USAGE = 64
EXIT_FILE = 74

SCENARIO_PATH_ENV = "IVF_SCENARIO_PATH"


class _FileError(Exception):
    """Wraps any failure to read or parse an input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(prog):
    return argparse.HelpFormatter(prog, width=80)


def _split_list(text):
    return tuple(part for part in (text or "").split(",") if part)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="ivfalsify",
        description="Negative-control falsification tests for IV designs.",
        formatter_class=_fmt,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_text, **kw):
        p = sub.add_parser(name, help=help_text, formatter_class=_fmt, **kw)
        return p

    def common_io(p, default_format="json"):
        p.add_argument("--out", help="write output to this file instead of stdout")
        p.add_argument(
            "--format", choices=("json", "csv"), default=default_format,
            help=f"output format (default {default_format})",
        )
        p.add_argument(
            "--config",
            help="YAML/JSON file whose keys override the flags given here",
        )

    def common_scenario(p):
        p.add_argument("--scenario", help="name of a built-in or registered scenario")
        p.add_argument(
            "--suspect", choices=("on", "off"), default="on",
            help="toggle the scenario's suspect mechanism (default on)",
        )
        p.add_argument(
            "--variant", choices=("continuous", "discrete"), default="continuous",
            help="scenario variant (default continuous)",
        )

    def common_plan(p):
        p.add_argument("--iv", help="IV column (defaults to the scenario's)")
        p.add_argument("--outcome", help="outcome column (defaults to the scenario's)")
        p.add_argument("--controls", help="comma-separated control columns")
        p.add_argument("--nco", help="comma-separated NCO candidate columns")
        p.add_argument("--nci", help="comma-separated NCI candidate columns")
        p.add_argument("--alpha", type=float, default=0.05, help="test level")
        p.add_argument("--cluster", help="cluster column for cr1 covariances")
        p.add_argument(
            "--vcov", choices=("classical", "hc1", "cr1"),
            help="covariance estimator (default hc1, or cr1 with --cluster)",
        )
        p.add_argument("--data", help="CSV file to test instead of simulating")

    # graph check
    p = add("graph", "graph-level operations")
    gsub = p.add_subparsers(dest="graph_command", metavar="SUBCOMMAND")
    pc = gsub.add_parser("check", help="qualification checks on a graph",
                         formatter_class=_fmt)
    pc.add_argument("path", nargs="?", help="file with a graph description "
                    "(node/edge lines); omit when using --scenario")
    pc.add_argument("--scenario", help="name of a built-in or registered scenario")
    pc.add_argument("--suspect", choices=("on", "off"), default="on")
    pc.add_argument("--apo", help="check this node as an alternative-path "
                    "variable on the outcome side")
    pc.add_argument("--api", help="check this node as an alternative-path "
                    "variable on the IV side")
    pc.add_argument("--nco", help="check this column as an NCO candidate "
                    "(qualifier searched unless --apo names it)")
    pc.add_argument("--nci", help="check this column as an NCI candidate "
                    "(qualifier searched unless --api names it)")
    pc.add_argument("--generalized", action="store_true",
                    help="use the generalized candidate assumptions")
    common_io(pc)

    # simulate
    p = add("simulate", "draw a dataset from a scenario")
    common_scenario(p)
    p.add_argument("--n", type=int, default=1000, help="sample size")
    p.add_argument("--seed", type=int, default=0, help="stream seed")
    p.add_argument(
        "--include-latents", action="store_true",
        help="also export latent columns (appended after observed ones)",
    )
    common_io(p)

    # test
    p = add("test", "run a single falsification test")
    p.add_argument(
        "--op", required=False,
        choices=(
            "nco-single", "nco-joint", "nci", "nci-unconditional",
            "gam-nco", "gam-nci", "reset",
        ),
        help="which test to run",
    )
    common_scenario(p)
    p.add_argument("--n", type=int, default=1000, help="sample size when simulating")
    p.add_argument("--seed", type=int, default=0, help="stream seed")
    p.add_argument("--reps", type=int, default=1,
                   help="simulate this many replicates and report rejection rates")
    p.add_argument("--force-unconditional", action="store_true",
                   help="skip the IV-independence pre-check (unconditional NCI)")
    common_plan(p)
    common_io(p)

    # diagnose
    p = add("diagnose", "residualized candidate/IV/outcome associations")
    common_scenario(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    common_plan(p)
    common_io(p)

    # suite
    p = add("suite", "qualification gate plus the full applicable battery")
    common_scenario(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1,
                   help="replicate the suite and add per-test rejection rates")
    p.add_argument("--test", action="append", dest="tests",
                   choices=SUITE_TESTS, metavar="TEST",
                   help="restrict the battery to this test (repeatable; "
                        f"one of: {', '.join(SUITE_TESTS)})")
    p.add_argument("--force-unconditional", action="store_true",
                   help="skip the IV-independence pre-check (unconditional NCI)")
    p.add_argument("--with-gam", action="store_true",
                   help="add the smooth test variants to the battery")
    common_plan(p)
    common_io(p)

    # scenarios
    p = add("scenarios", "scenario catalog operations")
    ssub = p.add_subparsers(dest="scenarios_command", metavar="SUBCOMMAND")
    ssub.add_parser("list", help="list available scenarios", formatter_class=_fmt)

    return parser


# -- input loading ---------------------------------------------------------


def _load_tree(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            tree = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise _FileError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise _FileError(f"config {path} must be a mapping")
    return tree


def _apply_config(args, parser):
    if not getattr(args, "config", None):
        return
    tree = _load_tree(args.config)
    overrides = tree.pop("overrides", None)
    known = vars(args)
    for key, value in tree.items():
        attr = key.replace("-", "_")
        if attr not in known:
            parser.error(f"unknown config key {key!r}")
        setattr(args, attr, value)
    if overrides is not None:
        if not isinstance(overrides, dict):
            parser.error("config key 'overrides' must be a mapping")
        args.scenario_overrides = overrides


def _register_user_scenarios():
    path = os.environ.get(SCENARIO_PATH_ENV)
    if not path:
        return
    for directory in path.split(os.pathsep):
        if not directory:
            continue
        try:
            entries = sorted(os.listdir(directory))
        except OSError as exc:
            raise _FileError(f"cannot read {SCENARIO_PATH_ENV} entry "
                             f"{directory}: {exc}") from exc
        for entry in entries:
            if not entry.endswith((".yaml", ".yml", ".json")):
                continue
            full = os.path.join(directory, entry)
            tree = _load_tree(full)
            try:
                register_scenario_config(tree)
            except ScmError as exc:
                raise _FileError(f"bad scenario file {full}: {exc}") from exc


def _build_scenario(args):
    overrides = dict(getattr(args, "scenario_overrides", ()) or ())
    overrides.setdefault("suspect", getattr(args, "suspect", "on"))
    if getattr(args, "variant", None):
        overrides.setdefault("variant", args.variant)
    return scenario(args.scenario, overrides)


def _load_graph_inputs(args, need_data=True):
    """Resolve (dag, spec, data, tags) from --scenario or --data/--graph."""
    dag = spec = data = None
    tags = ()
    if getattr(args, "scenario", None):
        dag, spec = _build_scenario(args)
        tags = spec.tags
    if need_data:
        if getattr(args, "data", None):
            try:
                data = Dataset.from_csv(args.data, cluster=args.cluster)
            except OSError as exc:
                raise _FileError(f"cannot read {args.data}: {exc}") from exc
            except DataError as exc:
                raise _FileError(str(exc)) from exc
        elif spec is not None:
            data = sample(spec, args.n, args.seed)
        else:
            raise BatteryError("need --scenario or --data")
    return dag, spec, data, tags


def _make_plan(args, dag, spec) -> TestPlan:
    iv = args.iv
    outcome = args.outcome
    controls = _split_list(args.controls)
    nco = _split_list(args.nco)
    nci = _split_list(args.nci)
    if dag is not None:
        iv = iv or dag.iv
        if outcome is None:
            outcome = dag.outcome
        if not controls:
            controls = tuple(dag.with_role("control"))
        if not nco and not nci:
            nco, nci = _assign_candidates(dag)
    if iv is None:
        raise BatteryError("no IV column: give --iv or --scenario")
    return TestPlan(
        iv=iv,
        outcome=outcome,
        controls=controls,
        nco=nco,
        nci=nci,
        alpha=args.alpha,
        cluster=args.cluster,
        vcov=getattr(args, "vcov", None),
    )


def _assign_candidates(dag):
    """Sort candidate-role nodes into NCO/NCI pools by which side qualifies."""
    nco, nci = [], []
    for nc in dag.with_role("candidate"):
        if qualify_nco(dag, nc).qualified or qualify_nco(dag, nc, generalized=True).qualified:
            nco.append(nc)
        elif qualify_nci(dag, nc).qualified or qualify_nci(dag, nc, generalized=True).qualified:
            nci.append(nc)
        else:
            nco.append(nc)  # let the suite gate report the failure
    return tuple(nco), tuple(nci)


# -- output ----------------------------------------------------------------


def _emit(args, text):
    out = getattr(args, "out", None)
    if out:
        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise _FileError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _emit_json(args, payload):
    _emit(args, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _dataset_text(data: Dataset, fmt) -> str:
    if fmt == "csv":
        lines = [",".join(data.names)]
        cols = [data[n] for n in data.names]
        for i in range(data.n):
            lines.append(",".join(repr(float(c[i])) for c in cols))
        return "\n".join(lines) + "\n"
    payload = {
        "n": data.n,
        "columns": {name: [float(v) for v in data[name]] for name in data.names},
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


# -- subcommand drivers ----------------------------------------------------


def _cmd_graph(args, parser):
    if args.graph_command != "check":
        parser.error("graph needs a subcommand (check)")
    if args.path and args.scenario:
        parser.error("give a graph file or --scenario, not both")
    if args.path:
        try:
            with open(args.path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise _FileError(f"cannot read {args.path}: {exc}") from exc
        try:
            dag = parse_graph(text)
        except GraphError as exc:
            raise _FileError(f"bad graph file {args.path}: {exc}") from exc
    elif args.scenario:
        dag, _ = _build_scenario(args)
    else:
        parser.error("graph check needs a graph file or --scenario")

    from .qualify import check_api, check_apo, check_general_api, check_general_apo

    if args.nco:
        if args.apo:
            verdict = check_nco(dag, args.nco, args.apo, generalized=args.generalized)
        else:
            verdict = qualify_nco(dag, args.nco, generalized=args.generalized)
    elif args.nci:
        if args.api:
            verdict = check_nci(dag, args.nci, args.api, generalized=args.generalized)
        else:
            verdict = qualify_nci(dag, args.nci, generalized=args.generalized)
    elif args.apo:
        verdict = check_apo(dag, args.apo)
    elif args.api:
        verdict = check_api(dag, args.api)
    else:
        verdict = check_iv_graphical(dag)
    _emit_json(args, verdict.to_dict())
    return EXIT_OK if verdict.qualified else EXIT_REJECT


def _export_columns(spec, data, include_latents):
    names = list(spec.observed)
    if include_latents:
        names += [n for n in spec.nodes if n in spec.latents]
    return Dataset({name: data[name] for name in names})


def _cmd_simulate(args, parser):
    if not args.scenario:
        parser.error("simulate needs --scenario")
    if args.n <= 0:
        parser.error("--n must be positive")
    dag, spec = _build_scenario(args)
    data = sample(spec, args.n, args.seed)
    out = _export_columns(spec, data, args.include_latents)
    _emit(args, _dataset_text(out, args.format))
    return EXIT_OK


_OPS = {
    "nco-single": nco_test_single,
    "nco-joint": nco_test_joint,
    "nci": nci_test,
    "nci-unconditional": nci_test_unconditional,
    "gam-nco": gam_nco_test,
    "gam-nci": gam_nci_test,
    "reset": reset_test,
}


def _run_op(op, data, plan, force):
    if op == "nci-unconditional":
        return nci_test_unconditional(data, plan, force=force)
    return _OPS[op](data, plan)


def _cmd_test(args, parser):
    if not args.op:
        parser.error("test needs --op")
    if args.reps < 1:
        parser.error("--reps must be at least 1")
    dag, spec, data, _tags = _load_graph_inputs(args)
    plan = _make_plan(args, dag, spec)
    force = args.force_unconditional
    if args.reps == 1 or spec is None:
        result = _run_op(args.op, data, plan, force)
        if isinstance(result, tuple):
            payload = [r.to_dict() for r in result]
        else:
            payload = result.to_dict()
        _emit_json(args, payload)
        rejected = (
            any(r.p_value <= plan.alpha for r in result)
            if isinstance(result, tuple)
            else result.p_value <= plan.alpha
        )
        return EXIT_REJECT if rejected else EXIT_OK
    counts: dict = {}
    for rep in range(args.reps):
        rep_data = sample(spec, args.n, args.seed + rep)
        result = _run_op(args.op, rep_data, plan, force)
        results = result if isinstance(result, tuple) else (result,)
        for res in results:
            label = next(
                (n.split("=", 1)[1] for n in res.notes if n.startswith("nc=")),
                res.kind,
            )
            hit, tot = counts.get(label, (0, 0))
            counts[label] = (hit + (res.p_value <= plan.alpha), tot + 1)
    payload = {
        "op": args.op,
        "alpha": plan.alpha,
        "reps": args.reps,
        "n": args.n,
        "rejection_rate": {
            label: hit / tot for label, (hit, tot) in sorted(counts.items())
        },
    }
    _emit_json(args, payload)
    return EXIT_OK


def _cmd_diagnose(args, parser):
    dag, spec, data, _tags = _load_graph_inputs(args)
    plan = _make_plan(args, dag, spec)
    rows = nc_diagnostics(data, plan)
    if args.format == "csv":
        lines = ["nc,abs_corr_iv,abs_corr_outcome"]
        for r in rows:
            yv = "" if r.abs_corr_outcome is None else repr(r.abs_corr_outcome)
            lines.append(f"{r.nc},{r.abs_corr_iv!r},{yv}")
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit_json(args, [r.to_dict() for r in rows])
    return EXIT_OK


def _result_label(res):
    nc = next((n.split("=", 1)[1] for n in res.notes if n.startswith("nc=")), None)
    return f"{res.kind}:{nc}" if nc else res.kind


def _cmd_suite(args, parser):
    if args.reps < 1:
        parser.error("--reps must be at least 1")
    dag, spec, data, tags = _load_graph_inputs(args)
    plan = _make_plan(args, dag, spec)
    if args.reps > 1 and spec is None:
        parser.error("--reps above 1 needs --scenario")
    meta = []
    if args.scenario:
        meta += [("scenario", args.scenario), ("seed", args.seed), ("n", args.n)]
        meta.append(("suspect", args.suspect))

    def one(run_data):
        return run_suite(
            run_data,
            plan,
            graph=dag,
            tags=tags,
            force_unconditional=args.force_unconditional,
            with_gam=args.with_gam,
            tests=args.tests,
            meta=tuple(meta),
        )

    report = one(data)
    if args.reps == 1:
        _emit(args, report.to_json())
    else:
        counts: dict = {}
        hits = 0
        for rep in range(args.reps):
            rep_report = report if rep == 0 else one(sample(spec, args.n, args.seed + rep))
            hits += bool(rep_report.rejected)
            for res in rep_report.results:
                label = _result_label(res)
                hit, tot = counts.get(label, (0, 0))
                counts[label] = (hit + (res.p_value <= plan.alpha), tot + 1)
        payload = {
            "replications": {
                "reps": args.reps,
                "alpha": plan.alpha,
                "n": args.n,
                "rejection_rate": {
                    label: hit / tot for label, (hit, tot) in sorted(counts.items())
                },
                "suite_rejection_rate": hits / args.reps,
            },
            "report": report.to_dict(),
        }
        _emit_json(args, payload)
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    return report.exit_code


def _cmd_scenarios(args, parser):
    if args.scenarios_command != "list":
        parser.error("scenarios needs a subcommand (list)")
    lines = []
    for info in list_scenarios():
        bits = [f"{info.name:<18} {info.description}"]
        if info.params:
            bits.append(f"    parameters: {', '.join(info.params)}")
        if info.tags:
            bits.append(f"    tags: {', '.join(info.tags)}")
        lines.extend(bits)
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    try:
        _register_user_scenarios()
        _apply_config(args, parser)
        if args.command == "graph":
            return _cmd_graph(args, parser)
        if args.command == "simulate":
            return _cmd_simulate(args, parser)
        if args.command == "test":
            return _cmd_test(args, parser)
        if args.command == "diagnose":
            return _cmd_diagnose(args, parser)
        if args.command == "suite":
            return _cmd_suite(args, parser)
        if args.command == "scenarios":
            return _cmd_scenarios(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except _FileError as exc:
        print(f"ivfalsify: {exc}", file=sys.stderr)
        return EXIT_FILE
    except (
        BatteryError,
        DataError,
        GraphError,
        RegressionError,
        ScmError,
        SplineError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"ivfalsify: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
