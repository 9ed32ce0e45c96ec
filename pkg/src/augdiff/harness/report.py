"""Static report emission: delimited tables plus rendered figures.

Every table carries comment lines with the config hash, the seeds, and the
feature-extractor note (FID values come from this pipeline's own encoder
and are only comparable within it). Reports are validated before anything
is written, so a failing emit leaves no partial files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..errors import DataError
from .experiment import FewShotCurve
from .sweeps import SweepRow

FID_EXTRACTOR_NOTE = "internal-encoder (not comparable to Inception-based FID)"


@dataclass
class MethodRow:
    method: str
    overall: float | None = None
    many: float | None = None
    medium: float | None = None
    few: float | None = None
    fid: float | None = None
    error: str | None = None

    def as_dict(self):
        return {
            "method": self.method,
            "overall": self.overall,
            "many": self.many,
            "medium": self.medium,
            "few": self.few,
            "fid": self.fid,
            "error": self.error,
        }


@dataclass
class EvalReport:
    """Everything one experiment produced, ready for emission."""

    overall: float | None = None
    many: float | None = None
    medium: float | None = None
    few: float | None = None
    fid: float | None = None
    method_rows: list[MethodRow] = field(default_factory=list)
    cfg_sweep: list[SweepRow] = field(default_factory=list)
    dropout_sweep: list[SweepRow] = field(default_factory=list)
    fewshot: FewShotCurve | None = None
    config_hash: str = ""
    seeds: list[int] = field(default_factory=list)
    fid_extractor: str = FID_EXTRACTOR_NOTE

    def has_content(self):
        return bool(
            self.method_rows
            or self.cfg_sweep
            or self.dropout_sweep
            or self.fewshot is not None
            or self.overall is not None
        )

    def to_dict(self):
        return {
            "overall": self.overall,
            "many": self.many,
            "medium": self.medium,
            "few": self.few,
            "fid": self.fid,
            "method_rows": [r.as_dict() for r in self.method_rows],
            "cfg_sweep": [r.as_dict() for r in self.cfg_sweep],
            "dropout_sweep": [r.as_dict() for r in self.dropout_sweep],
            "fewshot": self.fewshot.as_dict() if self.fewshot else None,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "fid_extractor": self.fid_extractor,
        }

    @classmethod
    def from_dict(cls, doc):
        fewshot = None
        if doc.get("fewshot"):
            fewshot = FewShotCurve(**doc["fewshot"])
        return cls(
            overall=doc.get("overall"),
            many=doc.get("many"),
            medium=doc.get("medium"),
            few=doc.get("few"),
            fid=doc.get("fid"),
            method_rows=[MethodRow(**r) for r in doc.get("method_rows", [])],
            cfg_sweep=[SweepRow(**r) for r in doc.get("cfg_sweep", [])],
            dropout_sweep=[SweepRow(**r) for r in doc.get("dropout_sweep", [])],
            fewshot=fewshot,
            config_hash=doc.get("config_hash", ""),
            seeds=doc.get("seeds", []),
            fid_extractor=doc.get("fid_extractor", FID_EXTRACTOR_NOTE),
        )


def save_results(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return path


def load_results(path):
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_table(path, header_lines, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_report(report, out_dir):
    """Write tables and figures for a completed report; returns written paths.

    Raises on an empty report before creating any file.
    """
    if not report.has_content():
        raise DataError("refusing to emit an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    figures = out_dir / "figures"

    header = [
        f"config_hash={report.config_hash}",
        f"seeds={','.join(str(s) for s in report.seeds)}",
        f"fid_extractor={report.fid_extractor}",
    ]
    written = []

    meta = out_dir / "report_meta.json"
    meta.write_text(
        json.dumps(
            {
                "config_hash": report.config_hash,
                "seeds": report.seeds,
                "fid_extractor": report.fid_extractor,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(meta)

    if report.overall is not None:
        path = out_dir / "accuracy.csv"
        _write_table(
            path, header,
            ["overall", "many", "medium", "few", "fid"],
            [[report.overall, report.many, report.medium, report.few, report.fid]],
        )
        written.append(path)

    if report.method_rows:
        path = out_dir / "methods.csv"
        _write_table(
            path, header,
            ["method", "overall", "many", "medium", "few", "fid", "error"],
            [
                [r.method, r.overall, r.many, r.medium, r.few, r.fid, r.error]
                for r in report.method_rows
            ],
        )
        written.append(path)

    for name, rows in (("cfg_sweep", report.cfg_sweep), ("dropout_sweep", report.dropout_sweep)):
        if not rows:
            continue
        path = out_dir / f"{name}.csv"
        _write_table(
            path, header,
            [
                "value", "overall", "many", "medium", "few", "fid",
                "diversity", "feature_variance", "embedding_variance", "error",
            ],
            [
                [
                    r.value, r.overall, r.many, r.medium, r.few, r.fid,
                    r.diversity, r.feature_variance, r.embedding_variance, r.error,
                ]
                for r in rows
            ],
        )
        written.append(path)

    if report.fewshot is not None:
        path = out_dir / "fewshot.csv"
        trial_count = max((len(t) for t in report.fewshot.per_trial), default=0)
        columns = ["shots", "mean", "variance"] + [f"trial{i}" for i in range(trial_count)]
        rows = [
            [shots, mean, var] + list(trials)
            for shots, mean, var, trials in zip(
                report.fewshot.shots, report.fewshot.means,
                report.fewshot.variances, report.fewshot.per_trial,
            )
        ]
        _write_table(path, header, columns, rows)
        written.append(path)

    written.extend(_emit_figures(report, figures))
    return written


def _emit_figures(report, figures_dir):
    written = []
    figures_dir.mkdir(parents=True, exist_ok=True)

    if report.fewshot is not None and report.fewshot.shots:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        shots = report.fewshot.shots
        means = report.fewshot.means
        var = report.fewshot.variances
        ax.plot(shots, means, marker="o", label="mean")
        ax.fill_between(
            shots,
            [m - v for m, v in zip(means, var)],
            [m + v for m, v in zip(means, var)],
            alpha=0.3,
            label="variance",
        )
        ax.set_xscale("log", base=2)
        ax.set_xticks(shots)
        ax.get_xaxis().set_major_formatter(plt.ScalarFormatter())
        ax.set_xlabel("examples per class")
        ax.set_ylabel("best val top-1")
        ax.legend()
        fig.tight_layout()
        path = figures_dir / "fewshot_accuracy.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    for name, rows, xlabel in (
        ("cfg_sweep", report.cfg_sweep, "guidance scale"),
        ("dropout_sweep", report.dropout_sweep, "dropout probability"),
    ):
        ok = [r for r in rows if r.error is None]
        if not ok:
            continue
        xs = [r.value for r in ok]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        drew_acc = False
        for field_name in ("overall", "many", "medium", "few"):
            ys = [getattr(r, field_name) for r in ok]
            if all(y is not None for y in ys):
                ax.plot(xs, ys, marker="o", label=field_name)
                drew_acc = True
        if drew_acc:
            ax.set_ylabel("top-1 accuracy")
        axr = None
        if any(r.fid is not None for r in ok):
            axr = ax.twinx() if drew_acc else ax
            ys = [r.fid for r in ok]
            axr.plot(xs, ys, marker="s", color="tab:red", label="FID")
            axr.set_ylabel("FID (internal extractor)")
        if any(r.diversity is not None for r in ok):
            target = axr or ax
            target.plot(
                xs, [r.diversity for r in ok], marker="^", color="tab:green",
                label="within-class diversity",
            )
        ax.set_xlabel(xlabel)
        handles, labels = ax.get_legend_handles_labels()
        if axr is not None and axr is not ax:
            h2, l2 = axr.get_legend_handles_labels()
            handles += h2
            labels += l2
        if handles:
            ax.legend(handles, labels, fontsize=8)
        fig.tight_layout()
        path = figures_dir / f"{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
