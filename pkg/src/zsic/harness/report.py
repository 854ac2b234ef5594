"""Report serialisation: a CSV (partition, metric, value, support) and a text table."""

import csv
import io
from dataclasses import dataclass, field

from .metrics import PartitionMetrics

F1_NOTE = "f1 = per-class F1 averaged with class-support weights"
PARTITION_ORDER = ("seen", "unseen", "overall")


@dataclass
class MetricsReport:
    task: str
    partitions: dict
    notes: list = field(default_factory=list)

    def __eq__(self, other):
        return (
            isinstance(other, MetricsReport)
            and self.task == other.task
            and self.partitions == other.partitions
            and self.notes == other.notes
        )


def to_csv(report):
    buf = io.StringIO()
    buf.write(f"# task={report.task}\n")
    for note in report.notes:
        buf.write(f"# {note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["partition", "metric", "value", "support"])
    for name, part in report.partitions.items():
        writer.writerow([name, "accuracy", repr(part.accuracy), part.support])
        writer.writerow([name, "f1", repr(part.f1), part.support])
        for label, support in part.class_support.items():
            writer.writerow([name, f"recall[{label}]", repr(part.class_recall[label]), support])
    return buf.getvalue()


def from_csv(text):
    task, notes, rows = None, [], []
    for line in text.splitlines():
        if line.startswith("# task="):
            task = line[len("# task="):]
        elif line.startswith("# "):
            notes.append(line[2:])
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(rows)
    parts = {}
    for row in reader:
        part = parts.setdefault(row["partition"], PartitionMetrics(0.0, 0.0, 0, {}, {}))
        metric, value, support = row["metric"], float(row["value"]), int(row["support"])
        if metric == "accuracy":
            part.accuracy, part.support = value, support
        elif metric == "f1":
            part.f1 = value
        elif metric.startswith("recall[") and metric.endswith("]"):
            label = metric[len("recall["):-1]
            part.class_recall[label] = value
            part.class_support[label] = support
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return MetricsReport(task, parts, notes)


def to_text(report, title="Ours"):
    names = list(report.partitions)
    header = ["Method"] + [f"{n.capitalize()} {m}" for n in names for m in ("Acc", "F1")]
    row = [title]
    for n in names:
        p = report.partitions[n]
        row += [f"{p.accuracy:.4f}", f"{p.f1:.4f}"]
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    fmt = " | ".join(f"{{:<{w}}}" for w in widths)
    lines = [f"task: {report.task}", *report.notes, "", fmt.format(*header), "-+-".join("-" * w for w in widths), fmt.format(*row), ""]
    for n in names:
        p = report.partitions[n]
        lines.append(f"[{n}] support={p.support}")
        for label, support in p.class_support.items():
            lines.append(f"  {label:<24} support={support:<6d} recall={p.class_recall[label]:.4f}")
    return "\n".join(lines) + "\n"


def write(report, csv_path, txt_path=None, title="Ours"):
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(report))
    if txt_path:
        with open(txt_path, "w", encoding="utf-8") as fh:
            fh.write(to_text(report, title))


def read(csv_path):
    with open(csv_path, encoding="utf-8") as fh:
        return from_csv(fh.read())
