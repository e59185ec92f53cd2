"""Uncertain piecewise-affine system models.

A model is a list of modes, each owning a polyhedral region of the state
space, a family of vertex systems (A_j, B_j, f_j, E_j) whose convex
combinations realize the parametric uncertainty, a polytopic input set
and a bounded additive-disturbance set. One simulation step blends the
vertex systems with the simplex weights and adds the mapped additive
disturbance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RagkitError, SchemaError
from .geometry import HPolyhedron, UnboundedDirection, bounding_box

SIMPLEX_TOL = 1e-12
_COVERAGE_SAMPLES = 512
_COVERAGE_SEED = 0x5EED


class OutsidePartition(RagkitError):
    """A state fell outside every mode region."""


class ModelError(RagkitError):
    pass


@dataclass(frozen=True)
class ModeDef:
    """One mode: region, vertex systems, input set, additive disturbance set."""

    region: HPolyhedron
    A_list: tuple
    B_list: tuple
    f_list: tuple
    E_list: tuple
    U: HPolyhedron
    Wa: HPolyhedron

    def __post_init__(self):
        A_list = tuple(np.asarray(A, dtype=float) for A in self.A_list)
        B_list = tuple(np.asarray(B, dtype=float) for B in self.B_list)
        f_list = tuple(np.asarray(f, dtype=float).reshape(-1) for f in self.f_list)
        E_list = tuple(np.asarray(E, dtype=float) for E in self.E_list)
        n_p = len(A_list)
        if n_p == 0 or not (len(B_list) == len(f_list) == len(E_list) == n_p):
            raise ModelError("vertex-system lists must be nonempty and equal length")
        n = A_list[0].shape[0]
        m = B_list[0].shape[1] if B_list[0].ndim == 2 else 1
        d = self.Wa.dim
        for A in A_list:
            if A.shape != (n, n):
                raise ModelError("every A_j must be n x n")
        B_list = tuple(B.reshape(n, m) for B in B_list)
        E_list = tuple(E.reshape(n, d) for E in E_list)
        for f in f_list:
            if f.size != n:
                raise ModelError("every f_j must have state dimension")
        if self.region.dim != n:
            raise ModelError("region dimension must match the state dimension")
        if self.U.dim != m:
            raise ModelError("input-set dimension must match B columns")
        # Wa must be bounded: the erosions and vertex checks rely on it
        try:
            bounding_box(self.Wa)
        except UnboundedDirection:
            raise ModelError("additive disturbance set must be bounded") from None
        object.__setattr__(self, "A_list", A_list)
        object.__setattr__(self, "B_list", B_list)
        object.__setattr__(self, "f_list", f_list)
        object.__setattr__(self, "E_list", E_list)

    @property
    def n_p(self) -> int:
        return len(self.A_list)

    @property
    def state_dim(self) -> int:
        return self.A_list[0].shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_list[0].shape[1]


@dataclass(frozen=True)
class Disturbance:
    """Simplex weights over the vertex systems plus an additive term."""

    wp: np.ndarray
    wa: np.ndarray

    def __post_init__(self):
        wp = np.asarray(self.wp, dtype=float).reshape(-1)
        wa = np.asarray(self.wa, dtype=float).reshape(-1)
        if abs(wp.sum() - 1.0) > SIMPLEX_TOL:
            raise ModelError(f"simplex weights sum to {wp.sum()}, expected 1")
        if wp.min(initial=0.0) < -SIMPLEX_TOL:
            raise ModelError("simplex weights must be nonnegative")
        object.__setattr__(self, "wp", wp)
        object.__setattr__(self, "wa", wa)


class PWAModel:
    """Immutable piecewise-affine model with a working box.

    The mode regions must cover the working box; this is sample-checked at
    construction with a fixed-seed batch of box points.
    """

    def __init__(self, modes: Sequence[ModeDef], working_box: HPolyhedron,
                 check_coverage: bool = True):
        modes = tuple(modes)
        if not modes:
            raise ModelError("model needs at least one mode")
        n = modes[0].state_dim
        m = modes[0].input_dim
        for md in modes:
            if md.state_dim != n or md.input_dim != m:
                raise ModelError("modes disagree on state/input dimensions")
        if working_box.dim != n:
            raise ModelError("working box dimension must match the state dimension")
        self.modes = modes
        self.state_dim = n
        self.input_dim = m
        self.working_box = working_box
        if check_coverage:
            self._check_coverage()

    def _check_coverage(self) -> None:
        lo, hi = bounding_box(self.working_box)
        rng = np.random.Generator(np.random.Philox(_COVERAGE_SEED))
        pts = rng.uniform(lo, hi, size=(_COVERAGE_SAMPLES, self.state_dim))
        inside = self.working_box.contains_batch(pts)
        pts = pts[inside]
        covered = np.zeros(pts.shape[0], dtype=bool)
        for md in self.modes:
            covered |= md.region.contains_batch(pts)
        if not covered.all():
            witness = pts[~covered][0]
            raise ModelError(f"mode regions do not cover the working box near {witness}")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def to_json(self) -> dict:
        return {
            "format": "pwa-v1",
            "state_dim": self.state_dim,
            "input_dim": self.input_dim,
            "working_box": self.working_box.to_json(),
            "modes": [
                {
                    "region": md.region.to_json(),
                    "A": [A.tolist() for A in md.A_list],
                    "B": [B.tolist() for B in md.B_list],
                    "f": [f.tolist() for f in md.f_list],
                    "E": [E.tolist() for E in md.E_list],
                    "U": md.U.to_json(),
                    "Wa": md.Wa.to_json(),
                }
                for md in self.modes
            ],
        }

    @classmethod
    def from_json(cls, obj: dict, where: str = "model") -> "PWAModel":
        if not isinstance(obj, dict):
            raise SchemaError(where, "expected a JSON object")
        if obj.get("format") != "pwa-v1":
            raise SchemaError(f"{where}.format", "expected 'pwa-v1'")
        for key in ("state_dim", "input_dim", "working_box", "modes"):
            if key not in obj:
                raise SchemaError(f"{where}.{key}", "missing field")
        box = HPolyhedron.from_json(obj["working_box"], f"{where}.working_box")
        modes = []
        for i, md in enumerate(obj["modes"]):
            loc = f"{where}.modes[{i}]"
            for key in ("region", "A", "B", "f", "E", "U", "Wa"):
                if key not in md:
                    raise SchemaError(f"{loc}.{key}", "missing field")
            try:
                modes.append(ModeDef(
                    region=HPolyhedron.from_json(md["region"], f"{loc}.region"),
                    A_list=tuple(np.array(A, dtype=float) for A in md["A"]),
                    B_list=tuple(np.array(B, dtype=float) for B in md["B"]),
                    f_list=tuple(np.array(f, dtype=float) for f in md["f"]),
                    E_list=tuple(np.array(E, dtype=float) for E in md["E"]),
                    U=HPolyhedron.from_json(md["U"], f"{loc}.U"),
                    Wa=HPolyhedron.from_json(md["Wa"], f"{loc}.Wa"),
                ))
            except (ModelError, ValueError) as exc:
                raise SchemaError(loc, str(exc)) from exc
        try:
            model = cls(modes, box)
        except ModelError as exc:
            raise SchemaError(where, str(exc)) from exc
        if int(obj["state_dim"]) != model.state_dim or int(obj["input_dim"]) != model.input_dim:
            raise SchemaError(f"{where}.state_dim", "declared dims disagree with matrices")
        return model

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "PWAModel":
        with open(path) as f:
            return cls.from_json(json.load(f), where=str(path))


def model_hash(model: PWAModel) -> str:
    """sha256 of the canonical JSON serialization."""
    payload = json.dumps(model.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def mode_of(model: PWAModel, x) -> int:
    """Lowest-index mode whose region contains x.

    Shared closed boundaries between regions resolve to the lower index.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    for q, md in enumerate(model.modes):
        if md.region.contains(x):
            return q
    raise OutsidePartition(f"outside partition: {x}")


def vertex_systems(model: PWAModel, q: int) -> list[tuple]:
    """The stored (A_j, B_j, f_j, E_j) tuples of mode q in index order."""
    md = model.modes[q]
    return [(md.A_list[j], md.B_list[j], md.f_list[j], md.E_list[j])
            for j in range(md.n_p)]


def step(model: PWAModel, x, u, w: Disturbance) -> np.ndarray:
    """One simulation step under disturbance w from state x with input u."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    q = mode_of(model, x)
    md = model.modes[q]
    if w.wp.size != md.n_p:
        raise ModelError(f"wp has {w.wp.size} weights, mode {q} has {md.n_p} vertex systems")
    if not md.U.contains(u):
        raise ModelError(f"input {u} outside the mode-{q} input set")
    if not md.Wa.contains(w.wa):
        raise ModelError(f"additive disturbance {w.wa} outside the mode-{q} set")
    wp = w.wp
    Aw = sum(wp[j] * md.A_list[j] for j in range(md.n_p))
    Bw = sum(wp[j] * md.B_list[j] for j in range(md.n_p))
    fw = sum(wp[j] * md.f_list[j] for j in range(md.n_p))
    Ew = sum(wp[j] * md.E_list[j] for j in range(md.n_p))
    return Aw @ x + Bw @ u + fw + Ew @ w.wa


def sample_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the unit simplex via sorted uniforms."""
    if n == 1:
        return np.ones(1)
    cuts = np.sort(rng.random(n - 1))
    return np.diff(np.concatenate([[0.0], cuts, [1.0]]))


def sample_in_polyhedron(P: HPolyhedron, rng: np.random.Generator,
                         max_draws: int = 100_000) -> np.ndarray:
    """Uniform rejection sample from a bounded polyhedron."""
    lo, hi = bounding_box(P)
    for _ in range(max(1, max_draws // 256)):
        X = rng.uniform(lo, hi, size=(256, P.dim))
        inside = P.contains_batch(X)
        if inside.any():
            return X[inside][0]
    raise ModelError("rejection sampling in polyhedron starved")


def sample_disturbance(model: PWAModel, q: int, rng: np.random.Generator) -> Disturbance:
    """Random disturbance for mode q: uniform simplex weights, uniform wa."""
    md = model.modes[q]
    return Disturbance(sample_simplex(md.n_p, rng), sample_in_polyhedron(md.Wa, rng))


def wa_vertices(Wa: HPolyhedron) -> np.ndarray:
    """Corners of the bounding box of Wa that are members of Wa.

    Exact vertex enumeration for the box-shaped disturbance sets used
    here; for non-box sets this under-approximates and callers relying on
    exactness should pass boxes.
    """
    lo, hi = bounding_box(Wa)
    d = lo.size
    corners = []
    for mask in range(1 << d):
        v = np.where([(mask >> i) & 1 for i in range(d)], hi, lo)
        if Wa.contains(v, tol=1e-7):
            corners.append(v)
    return np.array(corners)
