"""Batch evaluation: dataset manifests in, report files and tables out.

A manifest is a JSON file describing one dataset: its figures, each
figure's reference image, and one mesh per reconstruction method.  All
paths are resolved relative to the manifest's own directory so a
dataset directory can be moved wholesale.

Reports are JSON with two top-level keys: ``generated_at`` (the only
non-deterministic field) and ``report`` (records, aggregates, errors,
configuration — fully determined by the inputs, so two runs over the
same data produce byte-identical bodies).  Writes go through a
temporary file and an atomic rename; a crash never leaves a torn
report behind.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import ManifestInvalid, MiniaError
from .mesh_io import load_mesh
from .metrics import AggregateRow, MetricRecord, aggregate, evaluate_figure
from .raster import RenderConfig, load_reference
from .scorer import PerceptualScorer, StubScorer

__all__ = [
    "FigureEntry",
    "DatasetManifest",
    "Report",
    "load_manifest",
    "run_eval",
    "write_report",
    "read_report",
    "render_table",
]

TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class FigureEntry:
    figure_id: str
    reference_path: str
    mesh_paths: dict[str, str]  # method id -> path


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    figures: tuple[FigureEntry, ...]
    render_config: RenderConfig

    @property
    def methods(self) -> tuple[str, ...]:
        seen: set[str] = set()
        for fig in self.figures:
            seen.update(fig.mesh_paths)
        return tuple(sorted(seen))


@dataclass(frozen=True)
class Report:
    dataset_id: str
    records: tuple[MetricRecord, ...]
    aggregates: tuple[AggregateRow, ...]
    errors: tuple[dict, ...]
    render_config: RenderConfig
    scorer_models: tuple[str, str]
    generated_at: str
    study: dict | None = None  # optional win-rate block, keyed by method id


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a dataset manifest file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ManifestInvalid(f"cannot read manifest: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ManifestInvalid(f"manifest is not valid JSON: {exc}") from None

    if not isinstance(payload, dict):
        raise ManifestInvalid("manifest root must be an object")
    dataset_id = payload.get("dataset_id")
    if not dataset_id or not isinstance(dataset_id, str):
        raise ManifestInvalid("manifest needs a non-empty dataset_id string")
    figures_raw = payload.get("figures")
    if not isinstance(figures_raw, list) or not figures_raw:
        raise ManifestInvalid("manifest needs a non-empty figures array")

    base = os.path.dirname(os.path.abspath(path))

    def resolve(rel):
        p = rel if os.path.isabs(rel) else os.path.join(base, rel)
        if not os.path.exists(p):
            raise ManifestInvalid(f"referenced file does not exist: {rel}")
        return p

    figures = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(figures_raw):
        if not isinstance(raw, dict):
            raise ManifestInvalid(f"figures[{i}] must be an object")
        fid = raw.get("figure_id")
        if not fid or not isinstance(fid, str):
            raise ManifestInvalid(f"figures[{i}] needs a non-empty figure_id")
        if fid in seen_ids:
            raise ManifestInvalid(f"duplicate figure_id {fid!r}")
        seen_ids.add(fid)
        ref = raw.get("reference")
        if not ref or not isinstance(ref, str):
            raise ManifestInvalid(f"figure {fid!r} needs a reference image path")
        meshes = raw.get("meshes")
        if not isinstance(meshes, dict) or not meshes:
            raise ManifestInvalid(f"figure {fid!r} needs a non-empty meshes map")
        resolved = {}
        for method, rel in sorted(meshes.items()):
            if not isinstance(rel, str) or not rel:
                raise ManifestInvalid(
                    f"figure {fid!r} method {method!r} has an invalid path"
                )
            resolved[method] = resolve(rel)
        figures.append(FigureEntry(fid, resolve(ref), resolved))

    config = RenderConfig()
    overrides = payload.get("render_config", {})
    if overrides:
        if not isinstance(overrides, dict):
            raise ManifestInvalid("render_config must be an object")
        allowed = {f.name for f in dataclasses.fields(RenderConfig)}
        unknown = set(overrides) - allowed
        if unknown:
            raise ManifestInvalid(f"unknown render_config keys: {sorted(unknown)}")
        if "light_direction" in overrides and overrides["light_direction"] is not None:
            overrides = dict(overrides)
            overrides["light_direction"] = tuple(overrides["light_direction"])
        try:
            config = dataclasses.replace(config, **overrides)
        except (TypeError, ValueError) as exc:
            raise ManifestInvalid(f"bad render_config: {exc}") from None

    return DatasetManifest(dataset_id, tuple(figures), config)


def run_eval(
    manifest: DatasetManifest,
    scorer: PerceptualScorer | None = None,
    jobs: int = 1,
) -> Report:
    """Evaluate every (figure, method) mesh in the manifest.

    A failure on one mesh (unreadable file, degenerate geometry, scorer
    trouble) becomes an error entry; the rest of the batch continues.
    """
    scorer = scorer or StubScorer()
    models = scorer.handshake()

    tasks = []
    for fig in manifest.figures:
        for method, mesh_path in sorted(fig.mesh_paths.items()):
            tasks.append((fig, method, mesh_path))

    def run_one(task):
        fig, method, mesh_path = task
        try:
            mesh = load_mesh(mesh_path, method_id=method, figure_id=fig.figure_id)
            reference = load_reference(fig.reference_path)
            record = evaluate_figure(mesh, reference, manifest.render_config, scorer)
            return record, None
        except MiniaError as exc:
            return None, {
                "figure_id": fig.figure_id,
                "method_id": method,
                "error": type(exc).__name__,
                "message": str(exc),
            }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, tasks))
    else:
        results = [run_one(t) for t in tasks]

    records = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    records.sort(key=lambda r: (r.figure_id, r.method_id))
    errors.sort(key=lambda e: (e["figure_id"], e["method_id"]))

    aggregates = aggregate(records) if records else []
    return Report(
        dataset_id=manifest.dataset_id,
        records=tuple(records),
        aggregates=tuple(aggregates),
        errors=tuple(errors),
        render_config=manifest.render_config,
        scorer_models=models,
        generated_at=datetime.now(timezone.utc).isoformat(),
    )


# ------------------------------------------------------------- report IO


def _report_body(report: Report) -> dict:
    config = dataclasses.asdict(report.render_config)
    if config["light_direction"] is not None:
        config["light_direction"] = list(config["light_direction"])
    return {
        "tool_version": TOOL_VERSION,
        "dataset_id": report.dataset_id,
        "render_config": config,
        "scorer_models": {
            "clip": report.scorer_models[0],
            "lpips": report.scorer_models[1],
        },
        "aggregation": "mean",
        "records": [dataclasses.asdict(r) for r in report.records],
        "aggregates": [dataclasses.asdict(a) for a in report.aggregates],
        "errors": list(report.errors),
        "study": report.study,
    }


def write_report(report: Report, path) -> None:
    """Serialize atomically: temp file in the target directory, rename."""
    payload = {"generated_at": report.generated_at, "report": _report_body(report)}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".report-", suffix=".json", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------- tables


_COLUMNS = (
    # (header, aggregate field, format, best)  best: max | min | None
    ("IoU↑", "mean_silhouette_iou", "{:.3f}", "max"),
    ("LPIPS↓", "mean_lpips", "{:.3f}", "min"),
    ("CLIP↑", "mean_clip_similarity", "{:.3f}", "max"),
    ("Depth R.", "mean_depth_range_ratio", "{:.3f}", None),
    ("WT%↑", "watertight_pct", "{:.0f}%", "max"),
)


def render_table(report_payload: dict, fmt: str = "text") -> str:
    """Render a report's aggregate block as text, JSON or CSV.

    Accepts either the full report payload (with a ``report`` key) or
    the body itself.  Text format marks the best value per column with
    a ``*``; the depth ratio column is informational and never marked.
    A study block in the report adds a Win% column; without one the
    column is omitted entirely.
    """
    body = report_payload.get("report", report_payload)
    rows = body.get("aggregates", [])
    study = body.get("study") or {}
    win_pct = study.get("win_pct", {})

    columns = list(_COLUMNS)
    if win_pct:
        columns.append(("Win%↑", "__win_pct__", "{:.1f}", "max"))
        rows = [
            dict(row, __win_pct__=float(win_pct.get(row["method_id"], 0.0)))
            for row in rows
        ]

    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"

    if fmt == "csv":
        import csv
        import io

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["method", "figures"] + [field for _, field, _, _ in columns])
        for row in rows:
            writer.writerow(
                [row["method_id"], row["figure_count"]]
                + [repr(float(row[field])) for _, field, _, _ in columns]
            )
        return buf.getvalue()

    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")

    if not rows:
        return "(no aggregates)\n"

    best: dict[str, float] = {}
    for _, field, _, mode in columns:
        values = [float(r[field]) for r in rows]
        if mode == "max":
            best[field] = max(values)
        elif mode == "min":
            best[field] = min(values)

    header = ["Method", "Figs"] + [h for h, _, _, _ in columns]
    lines = [header]
    for row in rows:
        cells = [row["method_id"], str(row["figure_count"])]
        for _, field, fmt_str, mode in columns:
            value = float(row[field])
            cell = fmt_str.format(value)
            if mode is not None and value == best[field]:
                cell += "*"
            cells.append(cell)
        lines.append(cells)

    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = []
    for i, line in enumerate(lines):
        out.append(
            "  ".join(
                cell.ljust(widths[j]) if j < 2 else cell.rjust(widths[j])
                for j, cell in enumerate(line)
            ).rstrip()
        )
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
