"""Publication-style CDF figures from the simulator's per-scheme CDF CSVs.

Rendering is strictly read-only over the harness output: every CSV row
becomes one plotted point and no statistic is recomputed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CDF_HEADER = "rate_bits_per_hz,cdf"


class CdfDataError(ValueError):
    """Missing or malformed CDF CSV input."""


@dataclass(frozen=True)
class FigureSpec:
    """Labeled CDF inputs and the output figure path(s)."""

    inputs: tuple[tuple[str, Path], ...]   # (label, csv path) pairs
    output: Path
    title: str | None = None
    x_label: str = "ergodic rate [bit/s/Hz]"

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one labeled CSV is required")
        labels = [label for label, _ in self.inputs]
        if len(set(labels)) != len(labels):
            raise ValueError("curve labels must be unique")


def load_cdf_csv(path) -> tuple[list[float], list[float]]:
    """Read one CDF CSV, reporting the row number of anything malformed."""
    path = Path(path)
    if not path.exists():
        raise CdfDataError(f"{path}: no such file")
    rates: list[float] = []
    cdf: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CDF_HEADER:
            raise CdfDataError(f"{path}:1: expected header {CDF_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 2:
                raise CdfDataError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                rate, prob = float(parts[0]), float(parts[1])
            except ValueError:
                raise CdfDataError(f"{path}:{lineno}: non-numeric row {line.rstrip()!r}")
            rates.append(rate)
            cdf.append(prob)
    if not rates:
        raise CdfDataError(f"{path}: no data rows")
    return rates, cdf


def plot_cdfs(spec: FigureSpec) -> dict[str, int]:
    """Render one monotone step curve per labeled CSV; returns points per label."""
    curves = {label: load_cdf_csv(path) for label, path in spec.inputs}

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for label, (rates, cdf) in curves.items():
        ax.plot(rates, cdf, drawstyle="steps-post", marker=".", markersize=4,
                label=label)
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel("CDF")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.4)
    ax.legend()
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    return {label: len(rates) for label, (rates, _) in curves.items()}
