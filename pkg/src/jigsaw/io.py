"""Experiment configuration files, CSV/JSON result writers and PPM snapshots."""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .engine.dynamics import UsageError
from .montecarlo import CSV_HEADER
from .topology import Topology


# ------------------------------------------------------------------ config
@dataclass
class PcBlock:
    tol: float = 0.01
    trials_per_level: int = 200
    p_lo: float = 0.0
    p_hi: float = 1.0


@dataclass
class ExperimentConfig:
    """Effective settings of one CLI invocation; every key mirrors a flag.

    Stored as a JSON object.  ``theta`` is an integer or the string ``"inf"``;
    ``p_grid`` uses the flag syntax ``a:b:step``.
    """

    topology: str = "ring:n=1024"
    sigma: int = 1
    tau: int = 1
    theta: int | str = "inf"
    rule: str = "threshold"
    p: float | None = None
    p_grid: str | None = None
    pc: PcBlock | None = None
    trials: int = 100
    seed: int = 0
    parallelism: int | None = None
    out: str | None = None
    snapshot_every: int | None = None
    box: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        d = dict(d)
        if d.get("pc") is not None:
            pc = d["pc"]
            if not isinstance(pc, dict):
                raise UsageError("pc must be an object")
            bad = sorted(set(pc) - {f.name for f in fields(PcBlock)})
            if bad:
                raise UsageError(f"unknown pc keys: {', '.join(bad)}")
            d["pc"] = PcBlock(**pc)
        theta = d.get("theta", "inf")
        if isinstance(theta, str) and theta != "inf":
            raise UsageError('theta must be an integer or "inf"')
        return cls(**d)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise UsageError(f"config is not valid JSON: {e}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` inclusive of ``b`` (within rounding)."""
    try:
        a, b, s = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"p grid must be a:b:step, got {text!r}") from None
    if s <= 0 or b < a:
        raise UsageError("p grid needs step > 0 and b >= a")
    k = int(math.floor((b - a) / s + 1e-9))
    return [round(a + i * s, 12) for i in range(k + 1)]


# ------------------------------------------------------------------ writers
def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def write_results(rows, path) -> None:
    Path(path).write_text(format_csv(rows))


def artifact_version() -> str:
    """Package version, with the git commit appended when available."""
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             timeout=5, cwd=Path(__file__).parent)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def write_summary(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ snapshots
GREY = (160, 160, 160)
BLUE = (60, 110, 230)
DARK_BLUE = (10, 20, 120)
RED = (220, 30, 30)


@dataclass(frozen=True)
class Palette:
    """Size classes: ``1``, ``2..small-1``, ``small..large-1``, ``>= large``."""

    small: int = 10
    large: int = 100
    colours: tuple = field(default=(GREY, BLUE, DARK_BLUE, RED))

    def classify(self, sizes: np.ndarray) -> np.ndarray:
        return np.select([sizes <= 1, sizes < self.small, sizes < self.large], [0, 1, 2], 3)


@dataclass(frozen=True)
class SnapshotImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def to_bytes(self) -> bytes:
        return f"P6\n{self.width} {self.height}\n255\n".encode() + self.pixels.tobytes()

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SnapshotImage":
        parts = data.split(b"\n", 3)
        if parts[0] != b"P6":
            raise ValueError("not a binary PPM")
        w, h = (int(v) for v in parts[1].split())
        px = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
        return cls(w, h, px)


def render_snapshot(topology: Topology, labels, palette: Palette = Palette()) -> SnapshotImage:
    """Colour each cell of a 2D torus by the size class of its cluster.

    Row ``y`` of the image holds cells ``(x, y)``, ``x = 0..n-1``.
    """
    if topology.family != "torus" or topology.d != 2:
        raise UsageError("snapshots need a 2D torus")
    n = topology.n
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != n * n:
        raise UsageError("label array does not match the torus")
    sizes = np.bincount(labels, minlength=labels.max() + 1)[labels]
    cls = palette.classify(sizes)
    table = np.array(palette.colours, dtype=np.uint8)
    return SnapshotImage(n, n, table[cls].reshape(n, n, 3))
