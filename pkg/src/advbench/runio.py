"""File formats: checkpoint container, sweep-results CSV, run manifests, SVG.

Container layout (all integers little-endian)::

    b"ADVG" | u32 version | u32 n | n bytes canonical JSON header
    | u32 tensor count | per tensor: u32 ndim, ndim x u64 dims, float64 data

Model checkpoints put the model spec, seed and training metadata in the
header; adversarial datasets store images and labels as two tensors.
"""

import csv
import io
import json
import struct
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .errors import FormatError, LengthError, ParseError, PlotError
from .trend import AccuracySeries, poly_derivative

MAGIC = b"ADVG"
CONTAINER_VERSION = 1
CSV_HEADER = ("model_id", "seed", "epsilon", "n_samples", "n_correct", "accuracy")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# container


def encode_container(header, tensors):
    buf = io.BytesIO()
    meta = canonical_json(header).encode()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", CONTAINER_VERSION, len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(tensors)))
    for t in tensors:
        t = np.asarray(t, dtype="<f8")  # tobytes() below is C order; keeps 0-d shapes
        buf.write(struct.pack("<I", t.ndim))
        buf.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        buf.write(t.tobytes())
    return buf.getvalue()


def decode_container(data):
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise LengthError(f"container truncated at byte {pos} (wanted {n} more)")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise FormatError("not an ADVG container")
    version, meta_len = struct.unpack("<II", take(8))
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {version}")
    header = json.loads(bytes(take(meta_len)))
    (count,) = struct.unpack("<I", take(4))
    tensors = []
    for _ in range(count):
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64)
        tensors.append(arr.reshape(shape))
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after last tensor")
    return header, tensors


def save_checkpoint(model, path, **meta):
    header = {"kind": "model", "spec": json.loads(model.spec.to_json()), "seed": model.seed}
    header.update(meta)
    Path(path).write_bytes(encode_container(header, model.parameters))


def load_checkpoint(path):
    from .zoo import ModelSpec, build_from_spec

    header, tensors = decode_container(Path(path).read_bytes())
    if header.get("kind") != "model":
        raise FormatError(f"{path} is not a model checkpoint")
    model = build_from_spec(ModelSpec.from_json(header["spec"]), header["seed"], init=False)
    model.set_parameters(tensors)
    return model, header


def save_dataset(dataset, path, **meta):
    header = {"kind": "dataset", "name": dataset.name}
    header.update(meta)
    data = encode_container(header, [dataset.images, dataset.labels.astype(np.float64)])
    Path(path).write_bytes(data)


def load_dataset(path):
    from .mnist import Dataset

    header, tensors = decode_container(Path(path).read_bytes())
    if header.get("kind") != "dataset":
        raise FormatError(f"{path} is not a dataset container")
    images, labels = tensors
    return Dataset(images, labels.astype(np.int64), header.get("name", "")), header


# sweep results


@dataclass(frozen=True)
class SweepRecord:
    model_id: str
    seed: int
    epsilon: float
    n_samples: int
    n_correct: int
    accuracy: float

    @classmethod
    def make(cls, model_id, seed, epsilon, n_samples, n_correct):
        if n_samples < 1 or not 0 <= n_correct <= n_samples:
            raise ValueError(f"bad counts {n_correct}/{n_samples}")
        return cls(model_id, int(seed), float(epsilon), int(n_samples), int(n_correct),
                   n_correct / n_samples)


@dataclass(frozen=True)
class SweepResult:
    records: tuple = ()

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=lambda r: (r.model_id, r.epsilon, r.seed)))
        keys = [(r.model_id, r.seed, r.epsilon) for r in recs]
        if len(set(keys)) != len(keys):
            raise ParseError("duplicate (model_id, seed, epsilon) records")
        object.__setattr__(self, "records", recs)

    def __len__(self):
        return len(self.records)

    @property
    def model_ids(self):
        from .zoo import CATALOG

        ids = {r.model_id for r in self.records}
        order = list(CATALOG)
        return sorted(ids, key=lambda m: (order.index(m) if m in order else len(order), m))

    def epsilons(self, model_id):
        return sorted({r.epsilon for r in self.records if r.model_id == model_id})

    def pooled(self, model_id, epsilon):
        """Accuracy for one cell, pooling counts over seeds (None if absent)."""
        rows = [r for r in self.records if r.model_id == model_id and r.epsilon == epsilon]
        if not rows:
            return None
        return sum(r.n_correct for r in rows) / sum(r.n_samples for r in rows)

    def series(self, model_id):
        """Adversarial (eps > 0) accuracy series, pooled over seeds."""
        eps = [e for e in self.epsilons(model_id) if e > 0]
        return AccuracySeries(model_id, eps, [self.pooled(model_id, e) for e in eps])

    def benign(self, model_id):
        return self.pooled(model_id, 0.0)


def _fmt(x):
    return format(x, ".17g")


def results_to_csv(result):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in result.records:
        writer.writerow([r.model_id, r.seed, _fmt(r.epsilon), r.n_samples, r.n_correct,
                         _fmt(r.accuracy)])
    return out.getvalue()


def write_results_csv(result, path):
    Path(path).write_text(results_to_csv(result))


def parse_results_csv(text):
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ParseError(f"line 1: expected header {','.join(CSV_HEADER)}")
    records = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            rec = SweepRecord(row[0], int(row[1]), float(row[2]), int(row[3]), int(row[4]),
                              float(row[5]))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if rec.n_samples < 1 or not 0 <= rec.n_correct <= rec.n_samples:
            raise ParseError(f"line {lineno}: bad counts {rec.n_correct}/{rec.n_samples}")
        if rec.accuracy != rec.n_correct / rec.n_samples:
            raise ParseError(f"line {lineno}: accuracy != n_correct / n_samples")
        records.append(rec)
    return SweepResult(tuple(records))


def read_results_csv(path):
    return parse_results_csv(Path(path).read_text())


# Accuracies (percent) from the published adversarial sweep, 10,000 test images.
TABLE3_EPSILONS = (0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 5.0, 10.0, 16.0)
TABLE3_PERCENT = {
    "fnn1-256": (88.69, 88.23, 87.03, 88.97, 88.51, 88.61, 88.87, 88.08, 88.97, 86.45, 86.20),
    "fnn2": (94.02, 91.05, 87.66, 91.35, 88.58, 89.47, 89.37, 90.66, 88.79, 89.30, 91.74),
    "cnn3": (94.50, 70.00, 37.50, 14.50, 19.20, 16.39, 15.24, 19.56, 12.61, 17.40, 19.17),
    "cnn4": (90.15, 65.79, 38.66, 20.19, 14.65, 15.67, 20.44, 16.79, 11.58, 13.83, 10.77),
    "cnn6": (94.10, 75.50, 51.00, 23.02, 14.93, 14.29, 11.15, 14.56, 19.29, 17.80, 18.48),
    "cnn8": (96.47, 83.76, 79.11, 65.15, 38.14, 40.38, 38.08, 30.04, 32.10, 31.21, 16.73),
}
# The 32-unit single-hidden-layer network on the same grid.
TABLE2_FNN32_PERCENT = (39.11, 24.54, 25.21, 23.44, 19.73, 18.80, 17.57, 19.99, 16.80, 24.15, 21.23)


def table3_fixture(n_samples=10_000):
    """The published sweep as a SweepResult (6 models x 11 epsilons)."""
    records = []
    for model_id, column in TABLE3_PERCENT.items():
        for eps, pct in zip(TABLE3_EPSILONS, column):
            records.append(SweepRecord.make(model_id, 0, eps, n_samples,
                                            round(pct * n_samples / 100)))
    return SweepResult(tuple(records))


# manifests


@dataclass
class RunManifest:
    command: list
    seeds: list = field(default_factory=list)
    dataset_checksums: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    toolkit_version: str = __version__
    python: str = field(default_factory=lambda: sys.version.split()[0])
    numpy: str = np.__version__
    started: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    wall_clock_seconds: float = 0.0

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path):
        return cls(**json.loads(Path(path).read_text()))


# SVG


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#17becf")


def nice_ticks(lo, hi, target=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10 ** np.floor(np.log10(raw))
    step = mag * min((m for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10)
    start = np.ceil(lo / step - 1e-9) * step
    ticks = np.arange(start, hi + step * 1e-6, step)
    return [round(float(t), 10) + 0.0 for t in ticks]  # + 0.0 turns -0.0 into 0.0


class _Canvas:
    def __init__(self, xlim, ylim, width=720, height=480, margin=(60, 170, 40, 55)):
        self.xlim, self.ylim = xlim, ylim
        self.width, self.height = width, height
        self.left, self.right, self.top, self.bottom = margin
        self.parts = []

    def px(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        w = self.width - self.left - self.right
        h = self.height - self.top - self.bottom
        return (self.left + (x - x0) / (x1 - x0) * w,
                self.height - self.bottom - (y - y0) / (y1 - y0) * h)

    def add(self, s):
        self.parts.append(s)

    def polyline(self, xs, ys, color, css_class, dashed=False, title=None):
        pts = " ".join("%.2f,%.2f" % self.px(x, y) for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        label = f"<title>{escape(title)}</title>" if title else ""
        self.add(f'<polyline class="{css_class}" points="{pts}" fill="none" stroke="{color}"'
                 f' stroke-width="2"{dash}>{label}</polyline>')

    def axes(self, xlabel, ylabel, title):
        x0, y0 = self.px(self.xlim[0], self.ylim[0])
        x1, y1 = self.px(self.xlim[1], self.ylim[1])
        self.add(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y0:.2f}" stroke="black"/>')
        self.add(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1:.2f}" stroke="black"/>')
        for t in nice_ticks(*self.xlim):
            if self.xlim[0] <= t <= self.xlim[1]:
                x, _ = self.px(t, self.ylim[0])
                self.add(f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" y2="{y0 + 5:.2f}" stroke="black"/>')
                self.add(f'<text class="tick" x="{x:.2f}" y="{y0 + 18:.2f}" text-anchor="middle">{t:g}</text>')
        for t in nice_ticks(*self.ylim):
            if self.ylim[0] <= t <= self.ylim[1]:
                _, y = self.px(self.xlim[0], t)
                self.add(f'<line x1="{x0 - 5:.2f}" y1="{y:.2f}" x2="{x0:.2f}" y2="{y:.2f}" stroke="black"/>')
                self.add(f'<text class="tick" x="{x0 - 8:.2f}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
        self.add(f'<text x="{(x0 + x1) / 2:.2f}" y="{self.height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
        self.add(f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle"'
                 f' transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">{escape(ylabel)}</text>')
        self.add(f'<text x="{self.width / 2:.2f}" y="22" text-anchor="middle" font-weight="bold">{escape(title)}</text>')

    def legend(self, entries):
        x = self.width - self.right + 15
        for i, (label, color, dashed) in enumerate(entries):
            y = self.top + 10 + 20 * i
            dash = ' stroke-dasharray="6,4"' if dashed else ""
            self.add(f'<line class="legend" x1="{x}" y1="{y}" x2="{x + 25}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>')
            self.add(f'<text class="legend" x="{x + 32}" y="{y + 4}">{escape(label)}</text>')

    def render(self):
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}"'
                f' height="{self.height}" viewBox="0 0 {self.width} {self.height}"'
                f' font-family="sans-serif" font-size="12">\n'
                f'<rect width="100%" height="100%" fill="white"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def plot_accuracy_decline(series_list, fits=None, path=None, mode="decline", title=None):
    """Render accuracy-vs-epsilon series (``mode="decline"``) or the derivative
    lines of their quadratic fits (``mode="slopes"``) as an SVG document.

    ``fits`` maps model_id to a :class:`~advbench.trend.FitResult`. Returns the
    SVG text and writes it to ``path`` when given.
    """
    series_list = list(series_list)
    fits = dict(fits or {})
    if not series_list and not fits:
        raise PlotError("nothing to plot")
    colors = {}
    for s in series_list:
        colors.setdefault(s.model_id, PALETTE[len(colors) % len(PALETTE)])
    for m in fits:
        colors.setdefault(m, PALETTE[len(colors) % len(PALETTE)])
    legend = []
    if mode == "decline":
        if not series_list:
            raise PlotError("decline plot needs at least one series")
        xmax = max(max(s.epsilons) for s in series_list)
        canvas = _Canvas((0.0, xmax), (0.0, 1.0))
        canvas.axes("attack step size (epsilon)", "accuracy", title or "Accuracy under FGSM")
        for s in series_list:
            canvas.polyline(s.epsilons, s.fractions, colors[s.model_id], "data", title=s.model_id)
            legend.append((s.model_id, colors[s.model_id], False))
        for model_id, f in fits.items():
            lo = min(s.epsilons[0] for s in series_list)
            xs = np.linspace(lo, min(f.eps_max, xmax), 100)
            ys = np.clip(f.predict(xs), 0.0, 1.0)
            canvas.polyline(xs, ys, colors[model_id], "fit", dashed=True,
                            title=f"{model_id}: {f.equation()}")
            legend.append((f"{model_id} {f.family} fit", colors[model_id], True))
    elif mode == "slopes":
        quads = {m: f for m, f in fits.items() if f.family == "quadratic"}
        if not quads:
            raise PlotError("slope plot needs at least one quadratic fit")
        xmax = max(f.eps_max for f in quads.values())
        lines = {m: poly_derivative(f)[0] for m, f in quads.items()}
        ends = [v for line in lines.values() for v in (line(0.0), line(xmax))]
        pad = 0.05 * (max(ends) - min(ends) or 1.0)
        canvas = _Canvas((0.0, xmax), (min(ends) - pad, max(ends) + pad))
        canvas.axes("attack step size (epsilon)", "d accuracy / d epsilon",
                    title or "Slopes of quadratic fits")
        for m, line in lines.items():
            canvas.polyline([0.0, xmax], [line(0.0), line(xmax)], colors[m], "slope",
                            title=f"{m}: {line.slope:.3g}x {'-' if line.intercept < 0 else '+'} {abs(line.intercept):.3g}")
            legend.append((m, colors[m], False))
    else:
        raise PlotError(f"unknown plot mode {mode!r}")
    canvas.legend(legend)
    svg = canvas.render()
    if path is not None:
        Path(path).write_text(svg)
    return svg
