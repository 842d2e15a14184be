"""Evaluation metrics and report rendering.

Each report exists in two forms built from the same rows: a
tab-separated block for machines and an aligned table for humans. All
numbers are formatted deterministically so reruns with equal seeds give
byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .classifiers import IdentModel, identify
from .embedding import cosine_distance_matrix


def classification_accuracy(model: IdentModel, x: np.ndarray, y: np.ndarray) -> float:
    """Per-row accuracy of a fitted model."""
    return float(np.mean(model.predict(x) == np.asarray(y)))


def prediction_accuracy(counts: dict) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    total = sum(counts[k] for k in ("TP", "TN", "FP", "FN"))
    if total == 0:
        raise ValueError("no identification outcomes to score")
    return (counts["TP"] + counts["TN"]) / total


def cosine_silhouette(x: np.ndarray, y: np.ndarray) -> float:
    """Mean silhouette coefficient under cosine distance.

    For each sample: a = mean distance to its own class (excluding
    itself), b = smallest mean distance to any other class, score
    (b - a) / max(a, b). Singleton classes score 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("silhouette needs at least two classes")
    d = cosine_distance_matrix(x, x)
    n = x.shape[0]
    scores = np.zeros(n)
    masks = {c: y == c for c in classes}
    for i in range(n):
        own = masks[y[i]].copy()
        own[i] = False
        if not own.any():
            continue  # singleton
        a = d[i, own].mean()
        b = min(d[i, masks[c]].mean() for c in classes if c != y[i])
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def principal_axes(x: np.ndarray, k: int = 2) -> np.ndarray:
    """Project rows onto the top-k principal axes (for plots and demos)."""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:k].T


def accuracy_vs_frames(models: dict, x: np.ndarray, y: np.ndarray,
                       frame_counts, groups_per_identity: int = 20,
                       seed: int = 0):
    """Identification accuracy as a function of frames per decision.

    For every frame count, draw `groups_per_identity` groups of that many
    rows per identity and run the majority-vote identification; accuracy
    is the fraction of groups whose vote matches the identity. Counts
    larger than an identity's row budget are skipped. Returns
    ({model: {count: accuracy}}, skipped_counts).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    idx_by_class = {c: np.flatnonzero(y == c) for c in classes}
    min_rows = min(v.size for v in idx_by_class.values())
    results = {name: {} for name in models}
    skipped = [int(f) for f in frame_counts if f > min_rows]
    rng = np.random.default_rng(seed)
    for f in frame_counts:
        if f > min_rows:
            continue
        draws = {
            c: [rng.choice(idx_by_class[c], size=f, replace=False)
                for _ in range(groups_per_identity)]
            for c in classes
        }
        for name, model in models.items():
            correct = 0
            total = 0
            for c in classes:
                for rows in draws[c]:
                    if identify(model, x[rows]).label == c:
                        correct += 1
                    total += 1
            results[name][int(f)] = correct / total
    return results, skipped


# -- table rendering ----------------------------------------------------------


def fmt_float(v: float, places: int = 4) -> str:
    return f"{v:.{places}f}"


def render_tsv(headers, rows) -> str:
    lines = ["\t".join(headers)]
    lines += ["\t".join(str(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def render_aligned(headers, rows) -> str:
    """Right-aligned columns except the first, two-space gutters."""
    table = [list(map(str, headers))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    out = []
    for r, row in enumerate(table):
        cells = [row[0].ljust(widths[0])]
        cells += [row[i].rjust(widths[i]) for i in range(1, len(row))]
        out.append("  ".join(cells).rstrip())
        if r == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def variant_accuracy_report(rows) -> tuple:
    """(tsv, aligned) for rows of (variant, train_acc, test_acc)."""
    headers = ("model", "train_accuracy", "test_accuracy")
    body = [(name, fmt_float(tr), fmt_float(te)) for name, tr, te in rows]
    return render_tsv(headers, body), render_aligned(headers, body)


def frames_report(results: dict, frame_counts) -> tuple:
    """(tsv, aligned) table: one row per frame count, one column per model."""
    names = sorted(results)
    counts = [f for f in frame_counts if all(f in results[n] for n in names)]
    headers = ("frames",) + tuple(names)
    body = [(str(f),) + tuple(fmt_float(results[n][f]) for n in names)
            for f in counts]
    return render_tsv(headers, body), render_aligned(headers, body)


def mission_suite_report(logs) -> tuple:
    """(tsv, aligned) per-episode outcome table with Sum and accuracy rows."""
    headers = ("episode", "outcome", "TP", "TN", "FP", "FN")
    body = []
    total = {"TP": 0, "TN": 0, "FP": 0, "FN": 0}
    for i, log in enumerate(logs):
        c = log.counts
        body.append((str(i), log.outcome, c["TP"], c["TN"], c["FP"], c["FN"]))
        for k in total:
            total[k] += c[k]
    body.append(("Sum", "", total["TP"], total["TN"], total["FP"], total["FN"]))
    acc = prediction_accuracy(total)
    body.append(("Pred. Acc.", f"{100.0 * acc:.2f}%", "", "", "", ""))
    return render_tsv(headers, body), render_aligned(headers, body)


def text_chart(series: dict, width: int = 60, height: int = 12) -> str:
    """Crude ASCII line chart of {name: {x: y}} series, y in [0, 1]."""
    xs = sorted({x for pts in series.values() for x in pts})
    if not xs:
        return "(no data)\n"
    grid = [[" "] * width for _ in range(height)]
    markers = "ox+*#@%&"
    for k, (name, pts) in enumerate(sorted(series.items())):
        mark = markers[k % len(markers)]
        for x, yv in pts.items():
            col = int((xs.index(x) / max(len(xs) - 1, 1)) * (width - 1))
            row = int((1.0 - min(max(yv, 0.0), 1.0)) * (height - 1))
            grid[row][col] = mark
    lines = ["1.0 |" + "".join(row) for row in grid[:1]]
    lines += ["    |" + "".join(row) for row in grid[1:-1]]
    lines += ["0.0 |" + "".join(grid[-1])]
    lines.append("    +" + "-" * width)
    lines.append("     frames: " + " ".join(str(x) for x in xs))
    for k, name in enumerate(sorted(series)):
        lines.append(f"     {markers[k % len(markers)]} = {name}")
    return "\n".join(lines) + "\n"
