"""Command-line entry points.

Exit codes: 0 on success, 1 when a batch finished but some figures
failed (the report lists them), 2 on fatal errors (bad arguments,
unreadable manifest, broken scorer during startup, ...).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import MiniaError
from .harness import load_manifest, read_report, render_table, run_eval, write_report
from .mesh_io import load_mesh
from .orient import detect_orientation, enumerate_candidates, thinnest_axis
from .raster import composite_on_gray, frame_reference, load_reference, render, save_png
from .scorer import scorer_from_spec
from .study import (
    concordance_by_dataset,
    generate_plan,
    load_plan,
    read_log,
    save_plan,
    win_table,
)
from .study_service import StudyService, asset_token, make_server, reference_token

__all__ = ["main"]


def _add_scorer_arg(parser):
    parser.add_argument(
        "--scorer",
        default="stub",
        help="stub | sidecar | http:URL (sidecar reads MINIA_SCORER_CMD)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minia",
        description="Evaluation harness for single-image 3D reconstructions of flat artwork.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a dataset manifest into a report")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--jobs", type=int, default=1)
    _add_scorer_arg(p_eval)

    p_table = sub.add_parser("table", help="render a report's aggregate table")
    p_table.add_argument("--report", required=True)
    p_table.add_argument("--format", default="text", choices=["text", "json", "csv"])

    p_od = sub.add_parser(
        "orient-debug", help="dump all 16 candidate renders for one figure/method"
    )
    p_od.add_argument("--manifest", required=True)
    p_od.add_argument("--figure", required=True)
    p_od.add_argument("--method", required=True)
    p_od.add_argument("--out", required=True)
    _add_scorer_arg(p_od)

    p_study = sub.add_parser("study", help="forced-choice study tools")
    study_sub = p_study.add_subparsers(dest="study_command", required=True)

    p_plan = study_sub.add_parser("plan", help="generate a trial plan and its assets")
    p_plan.add_argument("--manifest", required=True)
    p_plan.add_argument("--out-plan", required=True)
    p_plan.add_argument("--assets", required=True)
    p_plan.add_argument("--repetitions", type=int, default=0,
                        help="total trial count; raised to full coverage if lower")
    p_plan.add_argument("--seed", type=int, default=0)
    _add_scorer_arg(p_plan)

    p_serve = study_sub.add_parser("serve", help="serve trials over HTTP")
    p_serve.add_argument("--plan", required=True)
    p_serve.add_argument("--log", required=True)
    p_serve.add_argument("--assets", required=True)
    p_serve.add_argument("--port", type=int, default=8710)
    p_serve.add_argument("--ui", default=None, help="directory with the participant UI bundle")

    p_an = study_sub.add_parser("analyze", help="win rates and rater concordance from a log")
    p_an.add_argument("--plan", required=True)
    p_an.add_argument("--log", required=True)
    p_an.add_argument("--format", default="text", choices=["text", "json"])
    p_an.add_argument(
        "--datasets",
        default=None,
        help="JSON file mapping figure_id to dataset name for per-dataset concordance",
    )
    return parser


# ----------------------------------------------------------- subcommands


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    with scorer_from_spec(args.scorer) as scorer:
        report = run_eval(manifest, scorer, jobs=args.jobs)
    write_report(report, args.out)
    for err in report.errors:
        print(
            f"error: {err['figure_id']}/{err['method_id']}: "
            f"{err['error']}: {err['message']}",
            file=sys.stderr,
        )
    print(f"wrote {args.out} ({len(report.records)} records, {len(report.errors)} errors)")
    return 1 if report.errors else 0


def _cmd_table(args) -> int:
    payload = read_report(args.report)
    sys.stdout.write(render_table(payload, args.format))
    return 0


def _cmd_orient_debug(args) -> int:
    manifest = load_manifest(args.manifest)
    entry = next((f for f in manifest.figures if f.figure_id == args.figure), None)
    if entry is None:
        raise MiniaError(f"figure {args.figure!r} is not in the manifest")
    if args.method not in entry.mesh_paths:
        raise MiniaError(f"method {args.method!r} has no mesh for figure {args.figure!r}")

    mesh = load_mesh(entry.mesh_paths[args.method], method_id=args.method,
                     figure_id=args.figure)
    reference = load_reference(entry.reference_path)
    config = manifest.render_config

    os.makedirs(args.out, exist_ok=True)
    with scorer_from_spec(args.scorer) as scorer:
        result = detect_orientation(mesh, reference, config, scorer)

    framed = frame_reference(reference, config)
    save_png(composite_on_gray(framed, config), os.path.join(args.out, "reference.png"))
    for cand in result.candidates:
        try:
            out = render(mesh, cand.as_transform, config)
        except MiniaError:
            continue
        save_png(out.shaded, os.path.join(args.out, f"candidate_{cand.index:02d}.png"))

    summary = {
        "figure_id": args.figure,
        "method_id": args.method,
        "axis": result.winner.axis,
        "winner_index": result.winner.index,
        "winner_label": result.winner.label,
        "gate_threshold": result.gate_threshold,
        "eligible": list(result.eligible),
        "candidates": [
            {
                "index": c.index,
                "label": c.label,
                "iou": float(result.ious[c.index]),
                "clip_similarity": result.clip_scores.get(c.index),
            }
            for c in result.candidates
        ],
    }
    with open(os.path.join(args.out, "orientation.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"winner: candidate {result.winner.index} ({result.winner.label})")
    return 0


def _cmd_study_plan(args) -> int:
    manifest = load_manifest(args.manifest)
    methods = list(manifest.methods)
    figures = [f.figure_id for f in manifest.figures]
    plan = generate_plan(figures, methods, repetitions_target=args.repetitions,
                         seed=args.seed)
    os.makedirs(args.assets, exist_ok=True)

    failures = 0
    with scorer_from_spec(args.scorer) as scorer:
        for entry in manifest.figures:
            reference = load_reference(entry.reference_path)
            framed = frame_reference(reference, manifest.render_config)
            ref_png = os.path.join(args.assets, f"{reference_token(entry.figure_id)}.png")
            save_png(composite_on_gray(framed, manifest.render_config), ref_png)
            for method, mesh_path in sorted(entry.mesh_paths.items()):
                try:
                    mesh = load_mesh(mesh_path, method_id=method,
                                     figure_id=entry.figure_id)
                    result = detect_orientation(mesh, reference,
                                                manifest.render_config, scorer)
                    out = render(mesh, result.winner.as_transform, manifest.render_config)
                except MiniaError as exc:
                    failures += 1
                    print(
                        f"error: {entry.figure_id}/{method}: "
                        f"{type(exc).__name__}: {exc}",
                        file=sys.stderr,
                    )
                    continue
                token = asset_token(entry.figure_id, method)
                save_png(out.shaded, os.path.join(args.assets, f"{token}.png"))

    save_plan(plan, args.out_plan)
    print(f"wrote {args.out_plan} ({len(plan)} trials) and assets in {args.assets}")
    return 1 if failures else 0


def _cmd_study_serve(args) -> int:
    service = StudyService.from_paths(args.plan, args.log, args.assets, args.ui)
    server = make_server(service, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving study on http://{host}:{port}/ (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _cmd_study_analyze(args) -> int:
    plan = load_plan(args.plan)
    responses = read_log(args.log)
    methods = sorted({m for t in plan for m in (t.method_a, t.method_b)})

    table = win_table(responses, plan)
    partition = None
    if args.datasets:
        with open(args.datasets, "r", encoding="utf-8") as fh:
            partition = json.load(fh)
    concordance = concordance_by_dataset(responses, methods, plan, partition)

    if args.format == "json":
        payload = {
            "win_table": {
                m: {
                    "wins": table.wins.get(m, 0),
                    "total": table.totals.get(m, 0),
                    "win_pct": table.win_pct(m),
                }
                for m in methods
            },
            "concordance": {
                name: {
                    "w": c.w,
                    "chi_squared": c.chi_squared,
                    "degrees_of_freedom": c.degrees_of_freedom,
                    "p_value": c.p_value,
                    "raters": c.rater_count,
                    "methods": c.method_count,
                }
                for name, c in concordance.items()
            },
            "ranking_basis": "per-rater win rates",
            "p_value_basis": "chi-squared upper tail approximation",
            "responses": len(responses),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0

    width = max((len(m) for m in methods), default=6)
    print(f"{'Method'.ljust(width)}  Wins  Total   Win%")
    for m in methods:
        print(
            f"{m.ljust(width)}  {table.wins.get(m, 0):4d}  {table.totals.get(m, 0):5d}  "
            f"{100.0 * table.win_pct(m):5.1f}"
        )
    for name, c in concordance.items():
        print(
            f"concordance[{name}]: W={c.w:.3f} chi2={c.chi_squared:.2f} "
            f"df={c.degrees_of_freedom} p={c.p_value:.3g} "
            f"({c.rater_count} raters, {c.method_count} methods; "
            f"chi-squared approximation)"
        )
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "table": _cmd_table,
    "orient-debug": _cmd_orient_debug,
}

_STUDY_COMMANDS = {
    "plan": _cmd_study_plan,
    "serve": _cmd_study_serve,
    "analyze": _cmd_study_analyze,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "study":
            return _STUDY_COMMANDS[args.study_command](args)
        return _COMMANDS[args.command](args)
    except MiniaError as exc:
        print(f"fatal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
