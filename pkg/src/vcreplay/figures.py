"""Render report figures and a delimited findings file next to the report."""

from __future__ import annotations

import csv
from pathlib import Path

from .analysis import Report
from .replay import ReplayResult

_TIMELINE_LIMIT = 60  # annotate clocks only for small traces


def render_figures(report: Report, result: ReplayResult, out_dir: str | Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    # Scenario totals.
    fig, ax = plt.subplots(figsize=(5, 3))
    labels = ["ac", "mp", "asc", "sc"]
    values = [report.ac, report.mp, report.asc, report.sc]
    ax.bar(labels, values, color=["#4878d0", "#ee854a", "#6acc64", "#d65f5f"])
    ax.set_ylabel("findings")
    ax.set_title("analysis totals" + ("  (deadlocked run)" if report.dr else ""))
    fig.tight_layout()
    path = out / "totals.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    # Event timeline: emission order vs thread, one marker style per kind.
    events = result.events
    if events:
        fig, ax = plt.subplots(figsize=(max(5, len(events) * 0.14), 3.2))
        styles = {
            "send": ("v", "#4878d0"),
            "receive": ("^", "#6acc64"),
            "close": ("x", "#d65f5f"),
            "default": ("s", "#956cb4"),
            "init": (".", "#8c8c8c"),
        }
        for i, ev in enumerate(events):
            marker, color = styles[ev.kind]
            ax.scatter(i, ev.thread, marker=marker, color=color, alpha=1.0 if ev.committed else 0.35)
            if len(events) <= _TIMELINE_LIMIT and ev.post is not None:
                ax.annotate(str(ev.post), (i, ev.thread), textcoords="offset points", xytext=(0, 6), fontsize=6)
        ax.set_xlabel("replay emission order")
        ax.set_ylabel("thread")
        ax.set_yticks(sorted({ev.thread for ev in events}))
        ax.set_title(f"annotated events ({result.terminal.kind})")
        fig.tight_layout()
        path = out / "timeline.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    # Delimited findings.
    path = out / "findings.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "channel", "detail"])
        for finding in report.findings:
            detail = "; ".join(f"{k}={v}" for k, v in finding.items() if k not in ("scenario", "channel"))
            writer.writerow([finding.get("scenario", ""), finding.get("channel", ""), detail])
    written.append(path)
    return written
