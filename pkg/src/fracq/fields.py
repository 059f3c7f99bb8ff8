"""Sampled fields on uniform boxes in R^3 and their ``.gf3`` serialization.

A ``.gf3`` file is a one-line JSON header (box center, half-widths,
resolution, node layout, decay model) terminated by a newline, followed by the
node values as little-endian float64 in row-major order with x1 varying
fastest.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError

GF3_MAGIC = "gf3"


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box with a uniform grid.

    With ``cell_centered=False`` (the default) nodes sit at
    ``center - half + i*h``, ``h = 2*half/N``: a periodic grid that contains
    the center for even N.  With ``cell_centered=True`` the nodes are the
    centers of the N^3 cells that tile the box exactly.
    """

    center: tuple = (0.0, 0.0, 0.0)
    half_widths: tuple = (1.0, 1.0, 1.0)
    resolution: tuple = (64, 64, 64)
    cell_centered: bool = False

    def __post_init__(self):
        c = tuple(float(v) for v in np.broadcast_to(np.asarray(self.center, float), (3,)))
        hw = tuple(float(v) for v in np.broadcast_to(np.asarray(self.half_widths, float), (3,)))
        res = tuple(int(v) for v in np.broadcast_to(np.asarray(self.resolution), (3,)))
        if any(not math.isfinite(v) for v in c + hw):
            raise DomainError("box center and half-widths must be finite")
        if min(hw) <= 0:
            raise DomainError("box half-widths must be positive")
        if min(res) < 2:
            raise DomainError("box resolution must be at least 2 per axis")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def cube(cls, half_width=1.0, n=64, center=(0.0, 0.0, 0.0), cell_centered=False):
        return cls(center, (half_width,) * 3, (n,) * 3, cell_centered)

    @property
    def spacing(self) -> np.ndarray:
        return 2.0 * np.asarray(self.half_widths) / np.asarray(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def shape(self) -> tuple:
        # array axes are (x3, x2, x1) so that x1 varies fastest in C order
        return self.resolution[::-1]

    def axes(self):
        """Node coordinates along x1, x2, x3."""
        out = []
        for c, hw, n, h in zip(self.center, self.half_widths, self.resolution, self.spacing):
            off = 0.5 * h if self.cell_centered else 0.0
            out.append(c - hw + off + h * np.arange(n))
        return out

    def mesh(self):
        """Coordinate arrays (X1, X2, X3) with shape ``self.shape``."""
        a1, a2, a3 = self.axes()
        x3, x2, x1 = np.meshgrid(a3, a2, a1, indexing="ij")
        return x1, x2, x3

    def points(self) -> np.ndarray:
        x1, x2, x3 = self.mesh()
        return np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=1)

    def index_of(self, x, atol=1e-9):
        """Grid index (i3, i2, i1) of node x, or None if x is not a node."""
        x = np.asarray(x, float)
        idx = []
        for k, (ax, h) in enumerate(zip(self.axes(), self.spacing)):
            t = (x[k] - ax[0]) / h
            i = int(round(t))
            if abs(t - i) > atol or i < 0 or i >= len(ax):
                return None
            idx.append(i)
        return tuple(idx[::-1])

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        c = np.asarray(self.center)
        hw = np.asarray(self.half_widths)
        return np.all(np.abs(x - c) <= hw * (1 + 1e-12), axis=1)

    def to_json(self) -> dict:
        return {"center": list(self.center), "half_widths": list(self.half_widths),
                "resolution": list(self.resolution), "cell_centered": self.cell_centered}

    @classmethod
    def from_json(cls, d: dict) -> "Box3":
        return cls(tuple(d["center"]), tuple(d["half_widths"]), tuple(d["resolution"]),
                   bool(d.get("cell_centered", False)))


DECAY_KINDS = ("compact_support", "power_decay", "log_growth")


@dataclass(frozen=True)
class DecayModel:
    """Radial far-field model of a field outside its box.

    compact_support: zero.
    power_decay: amplitude * |x-c|^(-exponent).
    log_growth: offset - amplitude * log|x-c|.
    """

    kind: str = "compact_support"
    amplitude: float = 0.0
    exponent: float = 0.0
    offset: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in DECAY_KINDS:
            raise DomainError(f"unknown decay model {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @classmethod
    def compact(cls):
        return cls("compact_support")

    @classmethod
    def power(cls, amplitude, exponent, center=(0.0, 0.0, 0.0)):
        return cls("power_decay", float(amplitude), float(exponent), 0.0, center)

    @classmethod
    def log(cls, amplitude, offset, center=(0.0, 0.0, 0.0)):
        return cls("log_growth", float(amplitude), 0.0, float(offset), center)

    def radial(self, r):
        """Model value at distance r from the model center."""
        r = np.asarray(r, float)
        if self.kind == "compact_support":
            return np.zeros_like(r)
        if self.kind == "power_decay":
            return self.amplitude * r ** (-self.exponent)
        return self.offset - self.amplitude * np.log(r)

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.radial(np.linalg.norm(x - np.asarray(self.center), axis=-1))

    def growth_exponent(self) -> float:
        """p such that |model| ~ r^p at infinity (log growth counted as 0+)."""
        if self.kind == "compact_support":
            return -np.inf
        if self.kind == "power_decay":
            return -self.exponent
        return 0.0

    def to_json(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "exponent": self.exponent,
                "offset": self.offset, "center": list(self.center)}

    @classmethod
    def from_json(cls, d: dict) -> "DecayModel":
        return cls(d["kind"], float(d.get("amplitude", 0.0)), float(d.get("exponent", 0.0)),
                   float(d.get("offset", 0.0)), tuple(d.get("center", (0.0, 0.0, 0.0))))


@dataclass(frozen=True, eq=False)
class GridField3:
    """Scalar samples on the nodes of a Box3 plus a far-field model.

    ``values`` has shape ``box.shape`` = (N3, N2, N1) and is stored read-only.
    ``meta`` carries diagnostics such as warnings or validity radii.
    """

    box: Box3
    values: np.ndarray
    decay_model: DecayModel = DecayModel()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.box.shape:
            if v.size == int(np.prod(self.box.shape)):
                v = v.reshape(self.box.shape)
            else:
                raise DomainError(f"values shape {v.shape} does not match box {self.box.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("GridField3 values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, box: Box3, decay_model: Optional[DecayModel] = None, **meta):
        """Sample f(points (M,3)) -> (M,) on the box nodes."""
        vals = np.asarray(f(box.points()), float).reshape(box.shape)
        return cls(box, vals, decay_model or DecayModel.compact(), dict(meta))

    def with_values(self, values, decay_model=None, **meta) -> "GridField3":
        m = dict(self.meta)
        m.update(meta)
        return GridField3(self.box, values, decay_model or self.decay_model, m)

    def __add__(self, other):
        if isinstance(other, GridField3):
            if other.box != self.box:
                raise DomainError("fields live on different boxes")
            other = other.values
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridField3):
            if other.box != self.box:
                raise DomainError("fields live on different boxes")
            other = other.values
        return self.with_values(self.values - other)

    def __mul__(self, a):
        if isinstance(a, GridField3):
            a = a.values
        return self.with_values(self.values * a)

    __rmul__ = __mul__

    def at(self, x) -> float:
        idx = self.box.index_of(x)
        if idx is None:
            raise DomainError(f"{x} is not a grid node")
        return float(self.values[idx])

    def integral(self) -> float:
        """Node sum times cell volume (trapezoid/midpoint rule)."""
        return float(self.values.sum() * self.box.cell_volume)

    def outer_shell(self, width: int = 1):
        """Mask of nodes within ``width`` layers of the box boundary."""
        m = np.zeros(self.box.shape, bool)
        for ax in range(3):
            sl = [slice(None)] * 3
            sl[ax] = slice(0, width)
            m[tuple(sl)] = True
            sl[ax] = slice(-width, None)
            m[tuple(sl)] = True
        return m

    def decay_consistent(self, factor: float = 3.0, width: int = 1) -> bool:
        """Heuristic check that outer-shell magnitudes match the decay model.

        Passes when the mean magnitude on the outer shell lies within
        ``factor`` of the model's mean magnitude there (or both are tiny).
        """
        mask = self.outer_shell(width)
        pts = self.box.points()[mask.ravel()]
        data = float(np.mean(np.abs(self.values[mask])))
        model = float(np.mean(np.abs(self.decay_model(pts))))
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        if self.decay_model.kind == "compact_support":
            return data <= 1e-6 * scale
        if max(data, model) <= 1e-12 * scale:
            return True
        if data == 0 or model == 0:
            return False
        return 1.0 / factor <= data / model <= factor

    # serialization

    def header(self) -> dict:
        return {"format": GF3_MAGIC, "version": 1, "box": self.box.to_json(),
                "decay_model": self.decay_model.to_json(), "dtype": "<f8", "order": "x1-fastest"}

    def save(self, path) -> None:
        head = json.dumps(self.header(), sort_keys=True)
        with open(path, "wb") as fh:
            fh.write(head.encode("utf-8") + b"\n")
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "GridField3":
        with open(path, "rb") as fh:
            line = fh.readline()
            try:
                head = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                head = None
            if not isinstance(head, dict) or head.get("format") != GF3_MAGIC:
                raise DomainError(f"{path} is not a gf3 file")
            box = Box3.from_json(head["box"])
            data = np.frombuffer(fh.read(), dtype="<f8")
        if data.size != int(np.prod(box.shape)):
            raise DomainError(f"{path}: expected {np.prod(box.shape)} values, found {data.size}")
        return cls(box, data.reshape(box.shape).astype(float),
                   DecayModel.from_json(head["decay_model"]))
