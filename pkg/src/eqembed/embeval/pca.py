from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .index import EmbeddingIndex

UNLABELED = "unlabeled"
LEGEND_ROWS = 25


class DegenerateCovariance(ValueError):
    pass


def principal_axes(data: np.ndarray, n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Top-``n`` eigenvectors (as columns) of the sample covariance, and the mean.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    data = np.asarray(data, dtype=np.float64)
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (len(data) - 1)
    if not np.any(np.abs(cov) > 0):
        raise DegenerateCovariance("all points are identical")
    values, vectors = np.linalg.eigh(cov)
    axes = vectors[:, np.argsort(values, kind="stable")[::-1][:n]]
    for j in range(axes.shape[1]):
        col = axes[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            axes[:, j] = -col
    return axes, mean


def pca_project(data: np.ndarray, n: int = 2) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 3 or data.shape[1] < n:
        raise ValueError(f"need at least 3 points of dimension >= {n}")
    axes, mean = principal_axes(data, n)
    return (data - mean) @ axes


def pca_2d(index: EmbeddingIndex) -> list[tuple[str, float, float]]:
    coords = pca_project(index.matrix, 2)
    return [(e.id, float(u), float(v)) for e, (u, v) in zip(index.entries, coords)]


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def scatter_csv(coords, labels) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label", "u", "v"])
    for (pid, u, v), label in zip(coords, labels):
        writer.writerow([pid, label or "", repr(float(u)), repr(float(v))])
    return buf.getvalue()


def scatter_svg(coords, labels, title: str | None = None) -> bytes:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[str, list[tuple[float, float]]] = {}
    for (_, u, v), label in zip(coords, labels):
        series.setdefault(label or UNLABELED, []).append((u, v))
    # fixed salt and no date keep the SVG byte-identical across runs
    with matplotlib.rc_context({"svg.hashsalt": "eqembed", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 5))
        cmap = plt.get_cmap("tab20")
        for i, (label, pts) in enumerate(sorted(series.items())):
            arr = np.asarray(pts)
            ax.scatter(arr[:, 0], arr[:, 1], s=14, color=cmap(i % 20), label=label)
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        if title:
            ax.set_title(title)
        # outside the axes so a long legend never covers points
        ax.legend(fontsize="x-small", loc="upper left", bbox_to_anchor=(1.02, 1.0), frameon=False,
                  ncol=-(-len(series) // LEGEND_ROWS))
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_scatter(coords, labels, path, title: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.svg``; each file is replaced atomically."""
    coords = list(coords)
    labels = list(labels)
    if not coords:
        raise ValueError("nothing to plot")
    if len(labels) != len(coords):
        raise ValueError("one label per point is required")
    path = Path(path)
    csv_path, svg_path = path.with_suffix(".csv"), path.with_suffix(".svg")
    _atomic_write(csv_path, scatter_csv(coords, labels).encode("utf-8"))
    _atomic_write(svg_path, scatter_svg(coords, labels, title))
    return csv_path, svg_path
