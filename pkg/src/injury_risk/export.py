"""CSV tables and SVG charts for run artifacts, written byte-reproducibly."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed element ids and no timestamp keep repeated renders byte-identical
_RC = {"svg.hashsalt": "injury-risk", "svg.fonttype": "none", "font.size": 9}


def _cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (int,)):
        return str(v)
    try:
        return repr(float(v))
    except (TypeError, ValueError):
        return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_cell(v) for v in row])


def write_columns(path, columns: Mapping[str, Sequence]) -> None:
    """Equal-length named columns as a CSV table."""
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError("columns must have equal length")
    write_table(path, names, zip(*(columns[n] for n in names)))


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def line_chart(
    path,
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    styles: Mapping[str, str] | None = None,
) -> None:
    styles = dict(styles or {})
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        for name, (x, y) in series.items():
            ax.plot(x, y, styles.get(name, "-"), label=name, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        _save(fig, path)


def bar_chart(path, labels: Sequence[str], values: Sequence[float], ylabel: str, title: str = "") -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(labels) + 1.5), 3.6))
        pos = range(len(labels))
        ax.bar(pos, values, color=["#b2182b" if v > 0 else "#2166ac" for v in values])
        ax.set_xticks(list(pos))
        ax.set_xticklabels(labels, rotation=60, ha="right")
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
