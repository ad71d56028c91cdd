"""Uniformly sampled position traces and their on-disk formats.

CSV layout::

    # tool=levosc 0.1.0
    # seed=7
    # dt=0.0004273504273504273
    # t0=0.0
    # digest=...
    t,x
    0.0,1e-06
    ...

Values are written with ``repr`` so a write/read cycle is lossless.  The
``.npz`` form stores the raw float64 buffer and is bit-exact as well.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class TimeSeries:
    t0: float
    dt: float
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")

    def __len__(self):
        return self.samples.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return self.dt * (self.samples.size - 1)

    @property
    def fs(self) -> float:
        return 1.0 / self.dt

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.float64([self.t0, self.dt]).tobytes())
        h.update(self.samples.tobytes())
        return h.hexdigest()

    def slice_time(self, start: float, stop: float | None = None) -> "TimeSeries":
        i0 = max(0, int(np.ceil((start - self.t0) / self.dt - 1e-9)))
        i1 = self.samples.size if stop is None else int(np.floor((stop - self.t0) / self.dt + 1e-9)) + 1
        return TimeSeries(self.t0 + i0 * self.dt, self.dt, self.samples[i0:i1].copy(), dict(self.metadata))

    # -- serialisation ------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# tool=levosc {__version__}\n")
        for key in ("seed", "digest"):
            if key in self.metadata:
                buf.write(f"# {key}={self.metadata[key]}\n")
        buf.write(f"# dt={self.dt!r}\n# t0={self.t0!r}\n")
        for key in sorted(self.metadata):
            if key not in ("seed", "digest"):
                buf.write(f"# {key}={self.metadata[key]}\n")
        buf.write("t,x\n")
        t = self.t
        for ti, xi in zip(t.tolist(), self.samples.tolist()):
            buf.write(f"{ti!r},{xi!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "TimeSeries":
        if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
            text = Path(path_or_text).read_text()
        else:
            text = path_or_text
        meta = {}
        rows = []
        header_seen = False
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                if line.replace(" ", "") != "t,x":
                    raise ValueError(f"line {lineno}: expected column header 't,x', got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 2 columns")
            rows.append((float(parts[0]), float(parts[1])))
        if len(rows) < 2:
            raise ValueError("trace needs at least two samples")
        arr = np.array(rows)
        if "dt" in meta:
            dt = float(meta.pop("dt"))
        else:
            dt = float(np.median(np.diff(arr[:, 0])))
        t0 = float(meta.pop("t0")) if "t0" in meta else float(arr[0, 0])
        if not np.allclose(np.diff(arr[:, 0]), dt, rtol=1e-6, atol=0):
            raise ValueError("trace is not uniformly sampled")
        meta.pop("tool", None)
        if "seed" in meta:
            try:
                meta["seed"] = int(meta["seed"])
            except ValueError:
                pass
        return cls(t0, dt, arr[:, 1], meta)

    def save_npz(self, path) -> None:
        np.savez(path, t0=np.float64(self.t0), dt=np.float64(self.dt), samples=self.samples,
                 metadata=np.array(repr(sorted(self.metadata.items()))))

    @classmethod
    def load_npz(cls, path) -> "TimeSeries":
        import ast

        with np.load(path) as z:
            meta = dict(ast.literal_eval(str(z["metadata"])))
            return cls(float(z["t0"]), float(z["dt"]), z["samples"].copy(), meta)
