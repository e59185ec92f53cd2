"""H-representation polytope algebra over unions of polyhedra.

Every set here is an intersection of closed halfspaces {x : H x <= h}
(HPolyhedron); non-convex regions are finite ordered unions of those
(PolyUnion). Operations are pure functions backed by the dense LP solver
in ragkit.optim: membership and emptiness, intersection, Pontryagin
difference via per-row support functions, translation, affine preimage,
Cartesian product, Fourier-Motzkin projection with per-step redundancy
removal, and sample-based union inclusion testing.

Tolerances: membership/feasibility comparisons use MEMBERSHIP_TOL,
row-redundancy decisions use REDUNDANCY_TOL. Both are calibrated for
double-precision simplex on systems of at most ~100 rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import RagkitError, SchemaError
from .optim import LinearProgram, Status, solve_lp
from .rng import generator

MEMBERSHIP_TOL = 1e-9
REDUNDANCY_TOL = 1e-7
_ZERO_ROW_TOL = 1e-12


class GeometryError(RagkitError):
    """Base class for geometry failures."""


class DimensionMismatch(GeometryError):
    pass


class UnboundedDirection(GeometryError):
    """A support-function LP was unbounded."""


class UnboundedErosion(GeometryError):
    """Pontryagin difference against a set unbounded in a needed direction."""


class SamplingError(GeometryError):
    """Rejection sampling could not produce the requested points."""


class HPolyhedron:
    """Closed convex polyhedron {x in R^n : H x <= h}.

    H is (m, n), h is (m,). Zero rows are legal (m = 0 encodes the whole
    space). Instances are treated as immutable; all operations return new
    objects. Emptiness, once established by an LP, is cached.
    """

    __slots__ = ("H", "h", "_empty", "_bbox", "_verts2d")

    def __init__(self, H, h):
        H = np.asarray(H, dtype=float)
        if H.ndim == 1:
            H = H.reshape(1, -1)
        if H.ndim != 2:
            raise DimensionMismatch("H must be a 2-d matrix")
        h = np.asarray(h, dtype=float).reshape(-1)
        if H.shape[0] != h.size:
            raise DimensionMismatch(f"H has {H.shape[0]} rows but h has {h.size}")
        if not (np.isfinite(H).all() and np.isfinite(h).all()):
            raise GeometryError("H and h must be finite")
        self.H = H
        self.h = h
        self._empty: Optional[bool] = None
        self._bbox = None
        self._verts2d = False  # False = not computed; None = unavailable

    # -- constructors ---------------------------------------------------

    @classmethod
    def box(cls, lo, hi) -> "HPolyhedron":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.size != hi.size:
            raise DimensionMismatch("box bounds must have equal length")
        if np.any(lo > hi):
            raise GeometryError("box has lo > hi")
        n = lo.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def whole_space(cls, dim: int) -> "HPolyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def empty(cls, dim: int) -> "HPolyhedron":
        p = cls(np.zeros((1, dim)), np.array([-1.0]))
        p._empty = True
        return p

    # -- basic queries ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @property
    def n_rows(self) -> int:
        return self.H.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch(f"point has dim {x.size}, set has dim {self.dim}")
        return bool(np.all(self.H @ x <= self.h + tol))

    def contains_batch(self, X: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch("batch must be (k, dim)")
        if self.n_rows == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.H.T <= self.h + tol, axis=1)

    def is_empty(self) -> bool:
        if self._empty is None:
            out = solve_lp(LinearProgram(np.zeros(self.dim), self.H, self.h))
            self._empty = out.status is Status.INFEASIBLE
        return self._empty

    def support(self, d) -> float:
        """max d.x over the set; raises on empty sets and unbounded rays."""
        d = np.asarray(d, dtype=float).reshape(-1)
        if d.size != self.dim:
            raise DimensionMismatch("direction dim mismatch")
        out = solve_lp(LinearProgram(-d, self.H, self.h))
        if out.status is Status.UNBOUNDED:
            raise UnboundedDirection("support function unbounded")
        if out.status is Status.INFEASIBLE:
            raise GeometryError("support function of an empty set")
        return -out.objective

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached tight axis-aligned bounding box via support LPs."""
        if self._bbox is None:
            lo = np.empty(self.dim)
            hi = np.empty(self.dim)
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = 1.0
                hi[i] = self.support(e)
                lo[i] = -self.support(-e)
            self._bbox = (lo, hi)
        return self._bbox

    def to_json(self) -> dict:
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_json(cls, obj: dict, where: str = "polyhedron") -> "HPolyhedron":
        if not isinstance(obj, dict) or "H" not in obj or "h" not in obj:
            raise SchemaError(where, "expected an object with 'H' and 'h'")
        try:
            return cls(np.array(obj["H"], dtype=float), np.array(obj["h"], dtype=float))
        except (ValueError, DimensionMismatch) as exc:
            raise SchemaError(where, str(exc)) from exc

    def __repr__(self) -> str:
        return f"HPolyhedron(dim={self.dim}, rows={self.n_rows})"


def _check_same_dim(P: HPolyhedron, Q: HPolyhedron) -> None:
    if P.dim != Q.dim:
        raise DimensionMismatch(f"ambient dims differ: {P.dim} vs {Q.dim}")


def contains(P: HPolyhedron, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Componentwise closed-halfspace membership check."""
    return P.contains(x, tol)


def is_empty(P: HPolyhedron) -> bool:
    """True iff the LP feasibility problem for H x <= h is infeasible."""
    return P.is_empty()


def intersect(P: HPolyhedron, Q: HPolyhedron) -> HPolyhedron:
    """Row-stacked intersection with redundancy removal."""
    _check_same_dim(P, Q)
    stacked = HPolyhedron(np.vstack([P.H, Q.H]), np.concatenate([P.h, Q.h]))
    return remove_redundant(stacked)


def translate(P: HPolyhedron, t) -> HPolyhedron:
    """The set {x + t : x in P} = {x : H x <= h + H t}."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size != P.dim:
        raise DimensionMismatch("translation vector dim mismatch")
    return HPolyhedron(P.H, P.h + P.H @ t)


def affine_preimage(P: HPolyhedron, M) -> HPolyhedron:
    """{z : M z in P} = {z : (H M) z <= h}."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise DimensionMismatch("M must be a matrix")
    if M.shape[0] != P.dim:
        raise DimensionMismatch(f"M maps into dim {M.shape[0]}, set has dim {P.dim}")
    return HPolyhedron(P.H @ M, P.h.copy())


def cartesian_product(parts: Sequence[HPolyhedron]) -> HPolyhedron:
    """Block-diagonal stacking; ambient dim is the sum of part dims."""
    parts = list(parts)
    if not parts:
        raise GeometryError("cartesian product of an empty list")
    total = sum(p.dim for p in parts)
    rows = sum(p.n_rows for p in parts)
    H = np.zeros((rows, total))
    h = np.zeros(rows)
    r0 = c0 = 0
    for p in parts:
        H[r0:r0 + p.n_rows, c0:c0 + p.dim] = p.H
        h[r0:r0 + p.n_rows] = p.h
        r0 += p.n_rows
        c0 += p.dim
    return HPolyhedron(H, h)


def pontryagin_diff(P: HPolyhedron, B: HPolyhedron, b_map=None) -> HPolyhedron:
    """Erosion {x : x + v in P for all v in M B} via per-row support LPs.

    Each row i of P is tightened to h_i - max_{v in B} (M^T H_i) . v. The
    optional matrix ``b_map`` erodes by the linear image M B of B without
    materializing it in H-representation (support functions compose
    through linear maps). B must be nonempty and bounded in every needed
    direction.
    """
    if b_map is None:
        _check_same_dim(P, B)
        M = None
    else:
        M = np.asarray(b_map, dtype=float)
        if M.ndim == 0:
            M = M.reshape(1, 1)
        if M.shape != (P.dim, B.dim):
            raise DimensionMismatch(f"b_map must be ({P.dim}, {B.dim})")
    if B.is_empty():
        raise GeometryError("erosion by an empty set")
    dirs = P.H if M is None else P.H @ M
    shrink = np.zeros(P.n_rows)
    for i in range(P.n_rows):
        if np.max(np.abs(dirs[i]), initial=0.0) <= _ZERO_ROW_TOL:
            continue
        try:
            shrink[i] = B.support(dirs[i])
        except UnboundedDirection:
            raise UnboundedErosion("unbounded erosion") from None
    return HPolyhedron(P.H, P.h - shrink)


def _fm_eliminate(H: np.ndarray, h: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """One Fourier-Motzkin elimination of column j."""
    col = H[:, j]
    rest = np.delete(H, j, axis=1)
    zero = np.abs(col) <= _ZERO_ROW_TOL
    pos = col > _ZERO_ROW_TOL
    neg = col < -_ZERO_ROW_TOL
    keep_H = rest[zero]
    keep_h = h[zero]
    if not pos.any() or not neg.any():
        # the variable is unbounded on one side: all its rows drop out
        return keep_H, keep_h
    Hp = rest[pos] / col[pos, None]
    hp = h[pos] / col[pos]
    Hn = rest[neg] / (-col[neg, None])
    hn = h[neg] / (-col[neg])
    comb_H = (Hp[:, None, :] + Hn[None, :, :]).reshape(-1, rest.shape[1])
    comb_h = (hp[:, None] + hn[None, :]).reshape(-1)
    return np.vstack([keep_H, comb_H]), np.concatenate([keep_h, comb_h])


def project(P: HPolyhedron, keep_dims: Sequence[int]) -> HPolyhedron:
    """Projection onto the listed coordinates by Fourier-Motzkin.

    keep_dims must be strictly increasing and a strict subset of the
    ambient dimensions. Dropped variables are eliminated one at a time
    with LP-based redundancy removal after each elimination to control
    row blowup. x is in the result iff some lift (x, u) is in P.
    """
    keep = [int(i) for i in keep_dims]
    if keep != sorted(set(keep)):
        raise GeometryError("keep_dims must be strictly increasing")
    if not keep:
        raise GeometryError("keep_dims must be nonempty")
    if any(i < 0 or i >= P.dim for i in keep):
        raise DimensionMismatch("keep_dims outside ambient dimensions")
    if len(keep) >= P.dim:
        raise GeometryError("keep_dims must be a strict subset of the ambient dims")
    drop = sorted(set(range(P.dim)) - set(keep), reverse=True)
    H, h = P.H, P.h
    for j in drop:
        H, h = _fm_eliminate(H, h, j)
        reduced = remove_redundant(HPolyhedron(H, h))
        H, h = reduced.H, reduced.h
        if reduced._empty:
            return HPolyhedron.empty(len(keep))
    return HPolyhedron(H, h)


def _normalize_rows(H: np.ndarray, h: np.ndarray):
    """Unit-normal rows; drops trivially true rows, flags contradictions.

    Returns (H, h, empty) where empty is True when a zero row with
    negative rhs makes the whole set empty.
    """
    norms = np.linalg.norm(H, axis=1)
    degenerate = norms <= _ZERO_ROW_TOL
    if degenerate.any():
        if np.any(h[degenerate] < -MEMBERSHIP_TOL):
            return H, h, True
        keep = ~degenerate
        H, h, norms = H[keep], h[keep], norms[keep]
    if H.shape[0]:
        H = H / norms[:, None]
        h = h / norms
    return H, h, False


def _polar_reduce_2d(H: np.ndarray, h: np.ndarray) -> Optional[HPolyhedron]:
    """Exact row reduction for bounded full-dimensional 2-d systems.

    With an interior point z, the substitution b = h - H z > 0 turns each
    row into the polar point H_i / b_i; irredundant rows are exactly the
    strict hull vertices of those points. Needs a comfortably interior z
    and a bounded set; returns None to signal the LP fallback otherwise.
    """
    center, radius = chebyshev_center(HPolyhedron(H, h))
    if not np.isfinite(radius) or radius <= 1e-7:
        return None
    b = h - H @ center
    if b.min() <= 1e-9:
        return None
    pts = H / b[:, None]
    if np.max(np.abs(pts)) > 1e12:
        return None
    keep = _hull_indices_2d(pts)
    if keep.size < 3:
        return None
    result = HPolyhedron(H[keep], h[keep])
    result._empty = False
    return result


def polygon_vertices(P: HPolyhedron) -> Optional[np.ndarray]:
    """Vertices of a bounded 2-d polyhedron in facet-angle order.

    Internal acceleration for planar coverage/containment tests: facets
    of an irredundant bounded polygon, sorted by normal angle, are
    cyclically adjacent, so each vertex is the intersection of two
    consecutive facet lines. Returns None (and callers fall back to LPs)
    for other dimensions, unbounded or degenerate sets. Cached.
    """
    if P._verts2d is not False:
        return P._verts2d
    P._verts2d = None
    if P.dim != 2:
        return None
    R = remove_redundant(P)
    H, h = R.H, R.h
    m = H.shape[0]
    if m < 3:
        return None
    ang = np.arctan2(H[:, 1], H[:, 0])
    order = np.argsort(ang, kind="stable")
    gaps = np.diff(ang[order], append=ang[order][0] + 2.0 * np.pi)
    if np.max(gaps) >= np.pi - 1e-9:
        # normals do not positively span the plane: set is unbounded
        return None
    Hs, hs = H[order], h[order]
    verts = np.empty((m, 2))
    for i in range(m):
        j = (i + 1) % m
        A = np.array([Hs[i], Hs[j]])
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-12:
            return None
        verts[i, 0] = (hs[i] * A[1, 1] - A[0, 1] * hs[j]) / det
        verts[i, 1] = (A[0, 0] * hs[j] - hs[i] * A[1, 0]) / det
    # reject unbounded/inconsistent configurations
    if np.any(verts @ H.T > h + 1e-6):
        return None
    P._verts2d = verts
    return verts


def clip_polygon(verts: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by {x : a.x <= b}."""
    n = verts.shape[0]
    if n == 0:
        return verts
    vals = verts @ a - b
    out: list[np.ndarray] = []
    for i in range(n):
        j = (i + 1) % n
        vi, vj = vals[i], vals[j]
        if vi <= 0.0:
            out.append(verts[i])
        if (vi <= 0.0) != (vj <= 0.0):
            t = vi / (vi - vj)
            out.append(verts[i] + t * (verts[j] - verts[i]))
    return np.array(out) if out else np.empty((0, 2))


def polygon_area(verts: np.ndarray) -> float:
    """Shoelace area of a polygon given in boundary order."""
    if verts.shape[0] < 3:
        return 0.0
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def remove_redundant(P: HPolyhedron) -> HPolyhedron:
    """Minimal-ish representation with the point set unchanged.

    After row normalization and exact-duplicate collapsing, each row is
    kept only if maximizing it subject to the other surviving rows (plus
    a +1 relaxation cap on itself, which keeps the LP bounded) exceeds
    its own offset by more than -REDUNDANCY_TOL. Empty inputs collapse to
    the canonical one-row empty set.
    """
    H, h, empty = _normalize_rows(P.H.copy(), P.h.copy())
    if empty:
        return HPolyhedron.empty(P.dim)
    m = H.shape[0]
    if m == 0:
        out = HPolyhedron.whole_space(P.dim)
        out._empty = False
        return out
    # collapse duplicate normals, keeping the tightest offset
    keyed = np.round(H, 10)
    order = np.lexsort(np.column_stack([keyed, h]).T[::-1])
    keep_idx = []
    last_key = None
    for i in order:
        key = keyed[i].tobytes()
        if key != last_key:
            keep_idx.append(i)
            last_key = key
    keep_idx.sort()
    H, h = H[keep_idx], h[keep_idx]
    m = H.shape[0]

    probe = solve_lp(LinearProgram(np.zeros(P.dim), H, h))
    if probe.status is Status.INFEASIBLE:
        return HPolyhedron.empty(P.dim)

    if P.dim == 2 and m >= 10:
        reduced = _polar_reduce_2d(H, h)
        if reduced is not None:
            return reduced

    # witness cache: fully feasible points near facets. A witness within
    # REDUNDANCY_TOL of a row's offset certifies that row as
    # non-redundant without an LP. Row maximizers get clipped back onto
    # their own facet (staying feasible for everything) so every LP for a
    # surviving row contributes a witness.
    interior = probe.solution
    witness_mat = interior.reshape(1, -1).copy()
    alive = np.ones(m, dtype=bool)
    for i in range(m):
        if m == 1:
            break
        others = alive.copy()
        others[i] = False
        if not others.any():
            break
        if np.any(witness_mat @ H[i] > h[i] - REDUNDANCY_TOL):
            continue
        A_test = np.vstack([H[others], H[i:i + 1]])
        b_test = np.concatenate([h[others], [h[i] + 1.0]])
        out = solve_lp(LinearProgram(-H[i], A_test, b_test))
        if out.status is not Status.OPTIMAL:
            continue
        best = -out.objective
        if best <= h[i] - REDUNDANCY_TOL:
            alive[i] = False
            continue
        x_star = out.solution
        gain = H[i] @ x_star - H[i] @ interior
        if best > h[i] + MEMBERSHIP_TOL and gain > _ZERO_ROW_TOL:
            theta = (h[i] - H[i] @ interior) / gain
            x_star = interior + np.clip(theta, 0.0, 1.0) * (x_star - interior)
        witness_mat = np.vstack([witness_mat, x_star])
    result = HPolyhedron(H[alive], h[alive])
    result._empty = False
    return result


def bounding_box(obj) -> tuple[np.ndarray, np.ndarray]:
    """Tight axis-aligned bounding box via support LPs.

    Accepts an HPolyhedron or a PolyUnion; raises on empty or unbounded
    sets.
    """
    pieces = obj.pieces if isinstance(obj, PolyUnion) else (obj,)
    if not pieces:
        raise GeometryError("bounding box of an empty union")
    dim = pieces[0].dim
    lo = np.full(dim, np.inf)
    hi = np.full(dim, -np.inf)
    for p in pieces:
        plo, phi = p.bbox()
        lo = np.minimum(lo, plo)
        hi = np.maximum(hi, phi)
    return lo, hi


def chebyshev_center(P: HPolyhedron) -> tuple[Optional[np.ndarray], float]:
    """Center and radius of the largest inscribed ball.

    Radius is negative for empty sets and +inf (center None) when the
    ball can grow without bound; a radius <= 0 means no interior.
    """
    H, h, empty = _normalize_rows(P.H.copy(), P.h.copy())
    if empty:
        return None, -np.inf
    m = H.shape[0]
    if m == 0:
        return np.zeros(P.dim), np.inf
    A = np.column_stack([H, np.ones(m)])
    c = np.zeros(P.dim + 1)
    c[-1] = -1.0
    out = solve_lp(LinearProgram(c, A, h))
    if out.status is Status.UNBOUNDED:
        return None, np.inf
    if out.status is not Status.OPTIMAL:
        # the inscribed-ball LP is feasible for any radius negative enough
        raise GeometryError("inscribed-ball LP failed numerically")
    return out.solution[:-1].copy(), float(out.solution[-1])


def chebyshev_radius(P: HPolyhedron) -> float:
    """Radius of the largest inscribed ball (see chebyshev_center)."""
    return chebyshev_center(P)[1]


def _hull_indices_2d(pts: np.ndarray) -> np.ndarray:
    """Indices of strict convex-hull vertices (Andrew's monotone chain).

    Collinear boundary points are dropped; coincident points resolve
    deterministically. Cross-product comparisons use a scale-aware
    tolerance.
    """
    n = pts.shape[0]
    order = np.lexsort((np.arange(n), pts[:, 1], pts[:, 0]))
    scale = float(np.max(np.abs(pts))) or 1.0
    eps = 1e-12 * scale * scale

    def build(idx_seq):
        chain: list[int] = []
        for i in idx_seq:
            while len(chain) >= 2:
                o, a = pts[chain[-2]], pts[chain[-1]]
                cross = (a[0] - o[0]) * (pts[i][1] - o[1]) - (a[1] - o[1]) * (pts[i][0] - o[0])
                if cross <= eps:
                    chain.pop()
                else:
                    break
            chain.append(i)
        return chain

    lower = build(order)
    upper = build(order[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        hull = list(dict.fromkeys(lower + upper))
    return np.unique(np.array(hull, dtype=int))


class PolyUnion:
    """Finite ordered union of same-dimension polyhedra.

    Empty pieces are pruned at construction; the surviving piece order is
    the construction order (downstream tie-breaking depends on it).
    """

    __slots__ = ("pieces", "_dim")

    def __init__(self, pieces: Iterable[HPolyhedron], dim: Optional[int] = None):
        kept = []
        for p in pieces:
            if not isinstance(p, HPolyhedron):
                raise GeometryError("union pieces must be HPolyhedron")
            if kept and p.dim != kept[0].dim:
                raise DimensionMismatch("union pieces have mixed dimensions")
            if not p.is_empty():
                kept.append(p)
        if kept:
            self._dim = kept[0].dim
            if dim is not None and dim != self._dim:
                raise DimensionMismatch("explicit dim disagrees with pieces")
        else:
            if dim is None:
                raise GeometryError("empty union needs an explicit dim")
            self._dim = int(dim)
        self.pieces = tuple(kept)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def is_empty(self) -> bool:
        return not self.pieces

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatch("point dim mismatch")
        return any(p.contains(x, tol) for p in self.pieces)

    def contains_batch(self, X: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0], dtype=bool)
        for p in self.pieces:
            rem = ~out
            if not rem.any():
                break
            out[rem] = p.contains_batch(X[rem], tol)
        return out

    def piece_index_of(self, x, tol: float = MEMBERSHIP_TOL) -> Optional[int]:
        """Lowest index of a piece containing x, or None."""
        x = np.asarray(x, dtype=float).reshape(-1)
        for i, p in enumerate(self.pieces):
            if p.contains(x, tol):
                return i
        return None

    def to_json(self) -> dict:
        return {"dim": self.dim, "pieces": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_json(cls, obj: dict, where: str = "union") -> "PolyUnion":
        if not isinstance(obj, dict) or "dim" not in obj or "pieces" not in obj:
            raise SchemaError(where, "expected an object with 'dim' and 'pieces'")
        pieces = [HPolyhedron.from_json(p, f"{where}.pieces[{i}]")
                  for i, p in enumerate(obj["pieces"])]
        return cls(pieces, dim=int(obj["dim"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "PolyUnion":
        with open(path) as f:
            return cls.from_json(json.load(f), where=str(path))

    def __repr__(self) -> str:
        return f"PolyUnion(dim={self.dim}, pieces={self.n_pieces})"


def canonical_key(P: HPolyhedron, decimals: int = 9) -> bytes:
    """Order-independent fingerprint of a normalized constraint system."""
    H, h, empty = _normalize_rows(P.H.copy(), P.h.copy())
    if empty:
        return b"<empty>"
    system = np.round(np.column_stack([H, h]), decimals)
    if system.shape[0]:
        order = np.lexsort(system.T[::-1])
        system = system[order]
    # np.round can produce -0.0, which has a distinct byte pattern
    system = system + 0.0
    return system.tobytes()


def dedupe_rows(H: np.ndarray, h: np.ndarray, decimals: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Drop exactly duplicated (row, offset) pairs, keeping first occurrences."""
    if H.shape[0] <= 1:
        return H, h
    key = np.round(np.column_stack([H, h]), decimals) + 0.0
    _, first = np.unique(key, axis=0, return_index=True)
    keep = np.sort(first)
    return H[keep], h[keep]


def piece_contained(P: HPolyhedron, Q: HPolyhedron, tol: float = MEMBERSHIP_TOL) -> bool:
    """True iff P is a subset of Q (exact, via one support LP per Q row).

    Rows of Q that literally appear in P's system with an equal or larger
    offset are implied and skipped without an LP.
    """
    _check_same_dim(P, Q)
    if P.is_empty():
        return True
    verts = polygon_vertices(P)
    if verts is not None:
        return bool(np.all(verts @ Q.H.T <= Q.h + tol))
    p_rows = {}
    for i in range(P.n_rows):
        key = (np.round(P.H[i], 12) + 0.0).tobytes()
        prev = p_rows.get(key)
        if prev is None or P.h[i] < prev:
            p_rows[key] = P.h[i]
    for i in range(Q.n_rows):
        if np.max(np.abs(Q.H[i]), initial=0.0) <= _ZERO_ROW_TOL:
            if Q.h[i] < -tol:
                return False
            continue
        key = (np.round(Q.H[i], 12) + 0.0).tobytes()
        prev = p_rows.get(key)
        if prev is not None and prev <= Q.h[i] + tol:
            continue
        try:
            val = P.support(Q.H[i])
        except UnboundedDirection:
            return False
        if val > Q.h[i] + tol:
            return False
    return True


@dataclass(frozen=True)
class SubsetSample:
    """Outcome of sample-based union inclusion testing."""

    is_subset_evidence: bool
    counterexample: Optional[np.ndarray]
    n_checked: int


def sampled_subset(U1: PolyUnion, U2: PolyUnion, n_samples: int, rng_seed) -> SubsetSample:
    """Rejection-sample n_samples points of U1 and check membership in U2.

    Points are drawn uniformly from U1's bounding box and filtered by U1
    membership; the first sampled point of U1 outside U2 (in draw order)
    is returned as a counterexample.
    """
    if U1.dim != U2.dim:
        raise DimensionMismatch("union dims differ")
    if n_samples < 1:
        raise GeometryError("n_samples must be >= 1")
    if U1.is_empty():
        raise SamplingError("bounding box does not intersect U1")
    lo, hi = bounding_box(U1)
    rng = generator(rng_seed)
    accepted = 0
    drawn = 0
    cap = max(200_000, 500 * n_samples)
    chunk = max(1024, min(n_samples, 16_384))
    while accepted < n_samples:
        if drawn >= cap:
            raise SamplingError(
                f"rejection sampling starved: {accepted}/{n_samples} accepted after {drawn} draws")
        X = rng.uniform(lo, hi, size=(chunk, U1.dim))
        drawn += chunk
        inside = U1.contains_batch(X)
        pts = X[inside]
        if pts.shape[0] == 0:
            continue
        take = min(pts.shape[0], n_samples - accepted)
        pts = pts[:take]
        ok = U2.contains_batch(pts)
        if not ok.all():
            bad = int(np.nonzero(~ok)[0][0])
            return SubsetSample(False, pts[bad].copy(), accepted + bad + 1)
        accepted += take
    return SubsetSample(True, None, accepted)
