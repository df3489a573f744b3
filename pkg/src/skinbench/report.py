"""Comparison table assembly and report emission (CSV, text, JSON, figures).

The report directory ends up with:

    comparison.csv        one row per model, columns: Model, Weight size (MB),
                          Loading time (s), Accuracy (%)
    comparison.txt        the same table formatted for humans, plus the winner
    summary.json          records + run provenance (seed, ratios, config, ...)
    cm_<model>.csv        confusion matrix, rows = predicted, columns = actual
    cm_<model>.png        heatmap of the raw confusion counts
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import BadConfig, DuplicateModel, EmptyInput, IoError
from .evaluation import BenchmarkRecord, ConfusionMatrix

CSV_COLUMNS = ["Model", "Weight size (MB)", "Loading time (s)", "Accuracy (%)"]

SORT_KEYS = {
    "accuracy": lambda r: (-r.accuracy_pct, r.model_id),
    "weight": lambda r: (r.weight_size_mb, r.model_id),
    "load_time": lambda r: (r.loading_time_s, r.model_id),
    "name": lambda r: r.model_id,
}


@dataclass
class ComparisonTable:
    rows: list[BenchmarkRecord]
    sort_key: str

    @property
    def best(self) -> BenchmarkRecord:
        """Highest-accuracy model regardless of the display sort."""
        return min(self.rows, key=SORT_KEYS["accuracy"])


def build_table(records, sort_key: str = "accuracy") -> ComparisonTable:
    """Sort benchmark records into a comparison table."""
    records = list(records)
    if not records:
        raise EmptyInput("no benchmark records to tabulate")
    if sort_key not in SORT_KEYS:
        raise BadConfig(f"sort_key must be one of {sorted(SORT_KEYS)}, got {sort_key!r}")
    seen = set()
    for r in records:
        if r.model_id in seen:
            raise DuplicateModel(f"duplicate benchmark record for {r.model_id!r}")
        seen.add(r.model_id)
    return ComparisonTable(rows=sorted(records, key=SORT_KEYS[sort_key]), sort_key=sort_key)


def _file_id(model_id: str) -> str:
    return model_id.replace(" ", "_")


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """Confusion matrix as CSV with labeled rows/columns and an orientation note."""
    with open(path, "w", newline="") as fh:
        fh.write("# rows = predicted class, columns = actual class\n")
        writer = csv.writer(fh)
        writer.writerow(["predicted\\actual"] + cm.class_names)
        for name, row in zip(cm.class_names, cm.counts):
            writer.writerow([name] + [int(v) for v in row])


def render_confusion_heatmap(cm: ConfusionMatrix, path, title: str = "") -> None:
    """Raw-count heatmap with per-cell annotations."""
    k = cm.num_classes
    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * k, 0.8 + 0.9 * k))
    im = ax.imshow(cm.counts, cmap="Blues")
    ax.set_xticks(range(k), cm.class_names, rotation=45, ha="right")
    ax.set_yticks(range(k), cm.class_names)
    ax.set_xlabel("actual class")
    ax.set_ylabel("predicted class")
    if title:
        ax.set_title(title)
    threshold = cm.counts.max() / 2 if cm.counts.max() > 0 else 0
    for i in range(k):
        for j in range(k):
            v = int(cm.counts[i, j])
            ax.text(j, i, str(v), ha="center", va="center",
                    color="white" if v > threshold else "black", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _format_row(record: BenchmarkRecord) -> list[str]:
    return [
        record.model_id,
        f"{record.weight_size_mb:.3f}",
        f"{record.loading_time_s:.3f}",
        f"{record.accuracy_pct:.2f}",
    ]


def emit_report(table: ComparisonTable, out_dir, provenance: dict | None = None) -> list[Path]:
    """Write the full report file set; returns the paths written."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise IoError(f"output directory {out_dir} is not writable: {exc}") from exc

    written = []

    csv_path = out_dir / "comparison.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for record in table.rows:
            writer.writerow(_format_row(record))
    written.append(csv_path)

    txt_path = out_dir / "comparison.txt"
    widths = [max(len(r[i]) for r in ([CSV_COLUMNS] + [_format_row(x) for x in table.rows]))
              for i in range(4)]
    lines = []
    header = "  ".join(c.ljust(w) for c, w in zip(CSV_COLUMNS, widths))
    lines.append(header)
    lines.append("-" * len(header))
    for record in table.rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(_format_row(record), widths)))
    best = table.best
    lines.append("")
    lines.append(f"Best model by accuracy: {best.model_id} ({best.accuracy_pct:.2f}%)")
    txt_path.write_text("\n".join(lines) + "\n")
    written.append(txt_path)

    summary_path = out_dir / "summary.json"
    summary = {
        "sort_key": table.sort_key,
        "best_model": best.model_id,
        "records": [r.to_dict() for r in table.rows],
        "provenance": provenance or {},
    }
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(summary_path)

    for record in table.rows:
        stem = _file_id(record.model_id)
        cm_csv = out_dir / f"cm_{stem}.csv"
        write_confusion_csv(record.confusion, cm_csv)
        written.append(cm_csv)
        cm_png = out_dir / f"cm_{stem}.png"
        render_confusion_heatmap(record.confusion, cm_png, title=record.model_id)
        written.append(cm_png)

    return written


def read_comparison_csv(path) -> list[dict]:
    """Parse an emitted comparison.csv back into numeric rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise BadConfig(f"unexpected columns in {path}: {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({
                "Model": row["Model"],
                "Weight size (MB)": float(row["Weight size (MB)"]),
                "Loading time (s)": float(row["Loading time (s)"]),
                "Accuracy (%)": float(row["Accuracy (%)"]),
            })
    return out
