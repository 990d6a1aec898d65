"""Command-line interface.

Every subcommand reads a versioned model file, runs one analysis pipeline,
and emits the result either as JSON (``--format json``) or as plain tables,
in both cases under a reproducibility header carrying the tool version, the
model file's SHA-256, and the flags used.  Identical inputs and flags yield
byte-identical output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .closed import (
    analyze_closed,
    analyze_tandem,
    closed_transitions,
    isomorphic_model,
    tandem_transitions,
)
from .cluster import compile_cluster, metrics
from .dynamics import apply_completion, open_transitions
from .errors import (
    ModelFormatError,
    PandsError,
    ResourceError,
    UsageError,
)
from .modelfile import (
    LoadedClosed,
    LoadedCluster,
    LoadedOpen,
    LoadedTandem,
    dump_compiled,
    load_path,
)
from .oracle import build_generator, solve_unique, total_variation
from .product_form import (
    stability_check,
    stationary_truncated,
)
from .sim import SimConfig, simulate, simulate_protocol
from .model import validate_rate_function


def _fmt(value: float) -> str:
    return format(value, ".12g")


def _state_1based(state) -> list[int]:
    return [cls + 1 for cls in state]


def _parse_state(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) - 1 for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"cannot parse state {text!r}; use e.g. 1,3,2") from None


def _header(args: argparse.Namespace, model_path: str | None) -> dict:
    flags = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in {"func", "command"} and v is not None
    }
    if model_path is not None:
        digest = hashlib.sha256(Path(model_path).read_bytes()).hexdigest()
    else:
        digest = None
    return {
        "schema": "pands-output/1",
        "tool": "passandswap",
        "version": __version__,
        "model_sha256": digest,
        "flags": {k: str(v) for k, v in flags.items()},
    }


def _emit(header: dict, payload: dict, warnings: list[str],
          args: argparse.Namespace) -> None:
    out = sys.stdout
    if getattr(args, "output", None):
        out = open(args.output, "w")
    try:
        if args.format == "json":
            doc = {"header": header, "warnings": warnings, "result": payload}
            out.write(json.dumps(doc, indent=2, sort_keys=True))
            out.write("\n")
        else:
            for key, value in header.items():
                if value is None:
                    continue
                if isinstance(value, dict):
                    value = " ".join(f"{k}={v}" for k, v in value.items())
                out.write(f"# {key}: {value}\n")
            for warning in warnings:
                out.write(f"! warning: {warning}\n")
            _render(payload, out)
    finally:
        if out is not sys.stdout:
            out.close()


def _scalar_list(value: Any) -> bool:
    return isinstance(value, list) and not any(
        isinstance(v, (dict, list)) for v in value
    )


def _render(payload: Any, out, indent: str = "") -> None:
    if isinstance(payload, dict):
        for key, value in payload.items():
            if _scalar_list(value):
                body = ", ".join(str(v) for v in value)
                out.write(f"{indent}{key}: [{body}]\n")
            elif isinstance(value, (dict, list)):
                out.write(f"{indent}{key}:\n")
                _render(value, out, indent + "  ")
            else:
                out.write(f"{indent}{key}: {value}\n")
    elif isinstance(payload, list):
        for value in payload:
            if isinstance(value, (dict, list)):
                _render(value, out, indent + "  ")
            else:
                out.write(f"{indent}- {value}\n")
    else:
        out.write(f"{indent}{payload}\n")


def _distribution_rows(probabilities: Mapping, state_key) -> list[dict]:
    rows = sorted(
        probabilities.items(), key=lambda kv: (-kv[1], state_key(kv[0]))
    )
    return [
        {"state": state_key(state), "probability": _fmt(p)}
        for state, p in rows
    ]


def _need(model, kind, name: str):
    if not isinstance(model, kind):
        raise UsageError(
            f"this command needs a {name} model file, got "
            f"{type(model).__name__}"
        )
    return model


def _cmd_validate(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    queue = _need(loaded, LoadedOpen, "open").queue
    report = validate_rate_function(queue.rate_fn, args.max_total)
    payload = {
        "ok": report.ok,
        "checked_macrostates": report.checked_macrostates,
        "violations": [
            {"kind": v.kind, "witness": repr(v.witness), "detail": v.detail}
            for v in report.violations
        ],
    }
    return payload, []


def _cmd_stability(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    queue = _need(loaded, LoadedOpen, "open").queue
    report = stability_check(queue)
    payload = {
        "stable": report.stable,
        "violations": [
            {
                "classes": sorted(i + 1 for i in subset),
                "arrival_rate": _fmt(arr),
                "saturation_rate": _fmt(sat),
            }
            for subset, arr, sat in report.violations
        ],
        "saturation_rates": [
            {"classes": sorted(i + 1 for i in subset), "rate": _fmt(rate)}
            for subset, rate in sorted(
                report.saturation.items(), key=lambda kv: sorted(kv[0])
            )
        ],
    }
    return payload, []


def _cmd_analyze(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    queue = _need(loaded, LoadedOpen, "open").queue
    dist = stationary_truncated(queue, args.capacity, budget=args.budget)
    payload = {
        "capacity": dist.capacity,
        "states": len(dist.states),
        "empty_probability": _fmt(dist.probability(())),
        "mean_counts": [_fmt(v) for v in dist.mean_counts()],
        "distribution": _distribution_rows(
            dist.probabilities(), _state_1based
        ),
    }
    return payload, []


def _cmd_trace(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    queue = _need(loaded, LoadedOpen, "open").queue
    state = _parse_state(args.state)
    outcome = apply_completion(queue.swapping, state, args.position - 1)
    payload = {
        "state": _state_1based(state),
        "position": args.position,
        "chain": [p + 1 for p in outcome.chain],
        "departing_class": outcome.departing_class + 1,
        "next_state": _state_1based(outcome.next_state),
    }
    return payload, []


def _cmd_closed_analyze(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    closed = _need(loaded, LoadedClosed, "closed")
    analysis = analyze_closed(closed.queue, closed.initial, budget=args.budget)
    if analysis.order is not None:
        adherence = {
            "adheres": True,
            "placement_arcs": [
                [a + 1, b + 1] for a, b in sorted(analysis.order.arcs)
            ],
        }
    else:
        adherence = {
            "adheres": False,
            "iso_classes": list(analysis.iso.class_names),
        }
    payload = {
        "route": analysis.route,
        "initial_state": _state_1based(analysis.initial),
        "adherence": adherence,
        "states": len(analysis.states),
        "communicating_classes": [
            {"size": len(c), "closed": analysis.partition.closed[i]}
            for i, c in enumerate(analysis.partition.classes)
        ],
        "distribution": _distribution_rows(
            analysis.distribution, _state_1based
        ),
    }
    return payload, list(analysis.warnings)


def _tandem_state_doc(s) -> dict:
    c, d = s
    return {"first": _state_1based(c), "second": _state_1based(d)}


def _cmd_tandem_analyze(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    tandem = _need(loaded, LoadedTandem, "tandem")
    analysis = analyze_tandem(tandem.network, tandem.initial,
                              budget=args.budget)
    payload = {
        "initial_state": _tandem_state_doc(analysis.initial),
        "states": len(analysis.states),
        "communicating_classes": [
            {"size": len(c), "closed": analysis.partition.closed[i]}
            for i, c in enumerate(analysis.partition.classes)
        ],
        "distribution": [
            {
                "state": _tandem_state_doc(state),
                "probability": _fmt(p),
            }
            for state, p in sorted(
                analysis.distribution.items(),
                key=lambda kv: (-kv[1], kv[0]),
            )
        ],
    }
    return payload, list(analysis.warnings)


def _cmd_classes(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    if isinstance(loaded, LoadedClosed):
        analysis = analyze_closed(loaded.queue, loaded.initial,
                                  budget=args.budget)
        partition = analysis.partition
    elif isinstance(loaded, LoadedTandem):
        analysis = analyze_tandem(loaded.network, loaded.initial,
                                  budget=args.budget)
        partition = analysis.partition
    else:
        raise UsageError("the classes command needs a closed or tandem model")
    payload = {
        "states": len(partition.states),
        "components": [
            {"size": len(c), "closed": partition.closed[i]}
            for i, c in enumerate(partition.classes)
        ],
        "transient_states": len(partition.transient_state_indices()),
    }
    return payload, list(analysis.warnings)


def _cmd_iso(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    closed = _need(loaded, LoadedClosed, "closed")
    iso = isomorphic_model(closed.queue, closed.initial)
    payload = {
        "initial_state": _state_1based(closed.initial),
        "iso_classes": list(iso.class_names),
        "split_map": {
            str(orig + 1): [iso.class_names[i] for i in ids]
            for orig, ids in enumerate(iso.split_map)
        },
        "iso_initial": [iso.class_names[cls] for cls in iso.iso_initial],
        "iso_swapping_edges": [
            [iso.class_names[a], iso.class_names[b]]
            for a, b in sorted(iso.iso_queue.swapping.edges)
        ],
    }
    return payload, []


def _cmd_cluster_compile(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    spec = _need(loaded, LoadedCluster, "cluster").spec
    ct = compile_cluster(spec)
    doc = dump_compiled(ct)
    if args.emit:
        Path(args.emit).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    payload = {
        "token_classes": list(ct.class_names),
        "population": list(ct.network.population),
        "placement_arcs": [
            [ct.class_names[a], ct.class_names[b]]
            for a, b in sorted(ct.network.order.arcs)
        ],
        "tandem_model": doc,
    }
    return payload, []


def _cmd_cluster_analyze(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    spec = _need(loaded, LoadedCluster, "cluster").spec
    ct = compile_cluster(spec)
    analysis = analyze_tandem(ct.network, ct.initial, budget=args.budget)
    m = metrics(ct, analysis.distribution)
    payload = {
        "token_classes": list(ct.class_names),
        "states": len(analysis.states),
        "blocking": {t: _fmt(v) for t, v in m.blocking.items()},
        "throughput": {t: _fmt(v) for t, v in m.throughput.items()},
        "mean_unassigned": {
            k: _fmt(v) for k, v in m.mean_unassigned.items()
        },
        "mean_committed": {k: _fmt(v) for k, v in m.mean_committed.items()},
    }
    return payload, list(analysis.warnings)


def _cmd_simulate(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    cfg = SimConfig(
        events=args.events,
        time=args.time,
        warmup=args.warmup,
        seed=args.seed,
        replications=args.reps,
    )
    trace_lines: list[str] = []

    def trace(t, kind, chain, depart):
        chain_txt = ",".join(str(p + 1) for p in chain)
        depart_txt = "-" if depart is None else str(depart + 1)
        trace_lines.append(
            f"t={t:.6f} ev={kind} chain=[{chain_txt}] depart={depart_txt}"
        )

    trace_fn = trace if args.trace_log else None
    if isinstance(loaded, LoadedOpen):
        if args.capacity is None:
            raise UsageError("simulating an open model needs --capacity")
        result = simulate(loaded.queue, cfg, capacity=args.capacity,
                          trace=trace_fn)
        key = _state_1based
    elif isinstance(loaded, LoadedClosed):
        order_initial = loaded.initial
        result = simulate(loaded.queue, cfg, initial=order_initial,
                          trace=trace_fn)
        key = _state_1based
    elif isinstance(loaded, LoadedTandem):
        result = simulate(loaded.network, cfg, initial=loaded.initial,
                          trace=trace_fn)
        key = lambda s: _tandem_state_doc(s)
    elif isinstance(loaded, LoadedCluster):
        result = simulate_protocol(loaded.spec, cfg)
        key = list
    else:  # pragma: no cover
        raise UsageError("unsupported model kind")
    if args.trace_log:
        Path(args.trace_log).write_text("\n".join(trace_lines) + "\n")
    occupancy = sorted(
        result.occupancy.items(), key=lambda kv: (-kv[1], repr(kv[0]))
    )[: args.top]
    payload = {
        "replications": result.replications,
        "counters": {
            k: _fmt(v) for k, v in sorted(result.counters.items())
        },
        "counter_stderr": {
            k: _fmt(v) for k, v in sorted(result.counter_stderr.items())
        },
        "fractions": {
            k: _fmt(v) for k, v in sorted(result.fractions.items())
        },
        "fraction_stderr": {
            k: _fmt(v) for k, v in sorted(result.fraction_stderr.items())
        },
        "occupancy_top": [
            {"state": key(state), "fraction": _fmt(v)}
            for state, v in occupancy
        ],
    }
    return payload, []


def _cmd_oracle_compare(args) -> tuple[dict, list[str]]:
    loaded = load_path(args.model)
    if isinstance(loaded, LoadedOpen):
        queue = loaded.queue
        if args.capacity is None:
            raise UsageError("comparing an open model needs --capacity")
        analytic = stationary_truncated(queue, args.capacity,
                                        budget=args.budget).probabilities()
        gen = build_generator(
            lambda s: [
                (t.next_state, t.rate)
                for t in open_transitions(queue, s, args.capacity)
            ],
            (),
            budget=args.budget,
        )
        reference = solve_unique(gen)
        key = _state_1based
    elif isinstance(loaded, LoadedClosed):
        analysis = analyze_closed(loaded.queue, loaded.initial,
                                  budget=args.budget)
        analytic = dict(analysis.distribution)
        gen = build_generator(
            lambda s: [
                (t.next_state, t.rate)
                for t in closed_transitions(loaded.queue, s)
            ],
            loaded.initial,
            budget=args.budget,
        )
        reference = solve_unique(gen)
        key = _state_1based
    elif isinstance(loaded, LoadedTandem):
        analysis = analyze_tandem(loaded.network, loaded.initial,
                                  budget=args.budget)
        analytic = dict(analysis.distribution)
        gen = build_generator(
            lambda s: [
                (t.next_state, t.rate)
                for t in tandem_transitions(loaded.network, s)
            ],
            loaded.initial,
            budget=args.budget,
        )
        reference = solve_unique(gen)
        key = _tandem_state_doc
    else:
        raise UsageError("oracle-compare needs an open, closed, or tandem model")
    tv = total_variation(analytic, reference)
    residuals = sorted(
        ((abs(analytic[s] - reference[s]), s) for s in analytic),
        reverse=True,
    )[:10]
    if args.dump_matrix:
        lines = [f"# states {gen.n_states}"]
        coo = gen.matrix.tocoo()
        for u, v, val in zip(coo.row, coo.col, coo.data):
            lines.append(f"{int(u)} {int(v)} {float(val)!r}")
        Path(args.dump_matrix).write_text("\n".join(lines) + "\n")
    payload = {
        "states": len(analytic),
        "total_variation": _fmt(tv),
        "max_residuals": [
            {"state": key(s), "residual": _fmt(r)} for r, s in residuals
        ],
    }
    return payload, []


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="passandswap",
        description="Exact and simulated analysis of pass-and-swap queueing models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("model", help="model file (JSON)")
        p.add_argument("--format", choices=("table", "json"), default="table")
        p.add_argument("--output", help="write output to this path")
        p.set_defaults(func=func)
        return p

    p = add("validate", _cmd_validate, "check the rate-function contract")
    p.add_argument("--max-total", type=int, default=4)

    add("stability", _cmd_stability, "subset-wise stability test")

    p = add("analyze", _cmd_analyze, "truncated stationary distribution")
    p.add_argument("-N", "--capacity", type=int, required=True)
    p.add_argument("--budget", type=int, default=1_000_000)

    p = add("trace", _cmd_trace, "swap chain of one completion")
    p.add_argument("--state", required=True, help="comma-separated classes")
    p.add_argument("--position", type=int, required=True,
                   help="completing position, 1-based")

    p = add("closed-analyze", _cmd_closed_analyze,
            "closed-queue stationary distribution")
    p.add_argument("--budget", type=int, default=1_000_000)

    p = add("tandem-analyze", _cmd_tandem_analyze,
            "closed-tandem stationary distribution")
    p.add_argument("--budget", type=int, default=1_000_000)

    p = add("classes", _cmd_classes, "communicating class partition")
    p.add_argument("--budget", type=int, default=1_000_000)

    add("iso", _cmd_iso, "duplicate-class splitting summary")

    p = add("cluster-compile", _cmd_cluster_compile,
            "compile a cluster spec to a tandem model")
    p.add_argument("-o", "--emit", help="also write the tandem model here")

    p = add("cluster-analyze", _cmd_cluster_analyze,
            "compile and analyze a cluster spec")
    p.add_argument("--budget", type=int, default=1_000_000)

    p = add("simulate", _cmd_simulate, "discrete-event simulation")
    p.add_argument("--events", type=int)
    p.add_argument("--time", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--warmup", type=float, default=0.2)
    p.add_argument("-N", "--capacity", type=int)
    p.add_argument("--top", type=int, default=50)
    p.add_argument("--trace-log", help="write an event log to this path")

    p = add("oracle-compare", _cmd_oracle_compare,
            "analytic distribution against the generator solve")
    p.add_argument("-N", "--capacity", type=int)
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--dump-matrix", help="write the generator in triplet form")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload, warnings = args.func(args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ModelFormatError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PandsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    header = _header(args, args.model)
    _emit(header, payload, warnings, args)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
