"""Offline robust safe-set computation over unions of polyhedra.

The iteration starts from the constraint polygon clipped to a working
box and repeatedly maps each union piece backwards through every mode:
a state stays in the iterate k+1 exactly when some admissible input
sends all its disturbed successors into a single piece of iterate k.
Robustness against the simplex-weighted vertex systems reduces to
stacking the vertex dynamics; robustness against the additive
disturbance is a per-piece Pontryagin erosion. Each backward step is a
Fourier-Motzkin projection of a lifted (state, input) polyhedron.

The sequence of iterates is monotonically decreasing; compute() verifies
this by sampling after every step and raises with a witness point if a
counterexample appears (that would indicate a geometry bug, not a model
property).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import RagkitError, SchemaError
from .geometry import (HPolyhedron, PolyUnion, canonical_key, cartesian_product,
                       affine_preimage, clip_polygon, dedupe_rows, intersect,
                       piece_contained, polygon_area, polygon_vertices,
                       pontryagin_diff, project, remove_redundant, sampled_subset,
                       translate)
from .optim import LinearProgram, Status, solve_lp
from .parallel import map_ordered
from .pwa import PWAModel, model_hash


class MonotonicityError(RagkitError):
    """A later iterate produced a point outside the previous one."""

    def __init__(self, k: int, witness: np.ndarray):
        self.k = k
        self.witness = witness
        super().__init__(f"iterate {k} is not contained in iterate {k - 1}; "
                         f"witness point {witness.tolist()}")


@dataclass(frozen=True)
class SafeSetIterate:
    """One iterate: index k, the union, and the piece-count history r_0..r_k."""

    k: int
    set: PolyUnion
    per_iteration_piece_counts: list[int] = field(default_factory=list)
    warning_empty: bool = False


@dataclass(frozen=True)
class SafeSetConfig:
    """Knobs for compute(): iteration cap, clipping box, sampling budgets."""

    k_max: int
    working_box: HPolyhedron
    prune_tol: float = 1e-9
    convergence_samples: int = 10_000
    early_stop: bool = False
    containment_prune: bool = True
    seed: int = 0
    max_workers: Optional[int] = None

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.convergence_samples < 1:
            raise ValueError("convergence_samples must be >= 1")


def eroded_target(model: PWAModel, q: int, j: int, piece: HPolyhedron) -> HPolyhedron:
    """Piece eroded by the mapped additive-disturbance set, then shifted
    by the negated affine offset of vertex system j."""
    md = model.modes[q]
    eroded = pontryagin_diff(piece, md.Wa, b_map=md.E_list[j])
    return translate(eroded, -md.f_list[j])


def pre_piece(model: PWAModel, q: int, piece: HPolyhedron,
              working_box: Optional[HPolyhedron] = None) -> HPolyhedron:
    """Lifted one-step controllable set into a single target piece.

    Returns {(x, u) : x in region_q clipped to the box, u in U_q, and the
    stacked vertex dynamics send (x, u) into the eroded/shifted copies of
    ``piece``}. Membership of x in the current iterate is left to the
    caller, which intersects after projection.
    """
    md = model.modes[q]
    box = working_box if working_box is not None else model.working_box
    n, m = model.state_dim, model.input_dim
    region = intersect(md.region, box)
    if region.is_empty():
        return HPolyhedron.empty(n + m)
    targets = []
    for j in range(md.n_p):
        tj = eroded_target(model, q, j, piece)
        if tj.is_empty():
            return HPolyhedron.empty(n + m)
        targets.append(tj)
    stacked_map = np.vstack([np.hstack([md.A_list[j], md.B_list[j]])
                             for j in range(md.n_p)])
    dyn = affine_preimage(cartesian_product(targets), stacked_map)
    return intersect(cartesian_product([region, md.U]), dyn)


_COVERAGE_BUDGET = 4000
_INTERIOR_TOL = 1e-9
_COVERAGE_PROBES = 96
_PROBE_MARGIN = 1e-7


def _boxes_overlap(a, b, tol: float) -> bool:
    return bool(np.all(a[0] <= b[1] + tol) and np.all(b[0] <= a[1] + tol))


def _interior_point(P: HPolyhedron, tol: float):
    """A point of the tol-tightened system, or None when it is empty.

    Cheaper than an inscribed-ball LP and equivalent at the working
    tolerance: a returned point certifies nonempty interior.
    """
    out = solve_lp(LinearProgram(np.zeros(P.dim), P.H, P.h - tol))
    return out.solution if out.status is Status.OPTIMAL else None


_AREA_TOL = 1e-7


def _covered_poly(verts: np.ndarray, covers: list[tuple], start: int) -> bool:
    """Planar coverage by clipping: does the polygon minus the covers
    (given as (H, h, bbox) triples) have area below tolerance?"""
    if polygon_area(verts) <= _AREA_TOL:
        return True
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    for idx in range(start, len(covers)):
        H, h, (qlo, qhi) = covers[idx]
        if np.any(lo > qhi + _INTERIOR_TOL) or np.any(hi < qlo - _INTERIOR_TOL):
            continue
        frag = verts
        for i in range(H.shape[0]):
            # piece of the polygon strictly outside row i of the cover,
            # inside all previous rows
            outside = clip_polygon(frag, -H[i], -h[i])
            if outside.shape[0] and not _covered_poly(outside, covers, idx + 1):
                return False
            frag = clip_polygon(frag, H[i], h[i])
            if frag.shape[0] == 0:
                break
        return True
    return False


def _covered_by_union(P: HPolyhedron, others: list[HPolyhedron], tol: float,
                      budget: list[int]) -> bool:
    """True iff P minus the union of `others` has empty interior.

    Planar fast path: exact polygon clipping over the vertex forms. LP
    fallback: recursive region subtraction splitting P along the rows of
    the first overlapping cover piece; fragments whose tol-tightened
    system is infeasible count as covered (they sit within tol of the
    cover). The LP budget caps the worst case; running out returns
    False, which keeps the piece and never changes the union's point
    set.
    """
    verts = polygon_vertices(P)
    if verts is not None:
        covers = [(Q.H, Q.h, Q.bbox()) for Q in others]
        return _covered_poly(verts, covers, 0)
    return _covered_lp(P, others, tol, budget)


def _covered_lp(P: HPolyhedron, others: list[HPolyhedron], tol: float,
                budget: list[int]) -> bool:
    budget[0] -= 1
    if budget[0] < 0:
        return False
    w = _interior_point(P, tol)
    if w is None:
        return True
    pb = P.bbox()
    for idx, Q in enumerate(others):
        if not _boxes_overlap(pb, Q.bbox(), tol):
            continue
        # the LP handed us an interior point; if it escapes every
        # remaining cover piece it certifies an uncovered sliver
        escaped = True
        for R in others[idx:]:
            if R.contains(w, tol=_PROBE_MARGIN):
                escaped = False
                break
        if escaped:
            return False
        rest = others[idx + 1:]
        base_H, base_h = P.H, P.h
        prefix_H: list[np.ndarray] = []
        prefix_h: list[float] = []
        for i in range(Q.n_rows):
            fH, fh = dedupe_rows(
                np.vstack([base_H] + prefix_H + [-Q.H[i:i + 1]]),
                np.concatenate([base_h, np.asarray(prefix_h), [-Q.h[i]]]),
            )
            if not _covered_lp(HPolyhedron(fH, fh), rest, tol, budget):
                return False
            prefix_H.append(Q.H[i:i + 1])
            prefix_h.append(Q.h[i])
        return True
    return False


def _probe_uncovered(P: HPolyhedron, others: list[HPolyhedron],
                     rng: np.random.Generator) -> bool:
    """Cheap exact negative for the coverage test.

    Draws box samples, keeps points strictly interior to P, and reports
    True when one of them lies outside every cover piece; such a point
    certifies that P minus the union has interior. False is inconclusive.
    """
    lo, hi = P.bbox()
    if np.any(hi - lo < _PROBE_MARGIN):
        return False
    X = rng.uniform(lo, hi, size=(_COVERAGE_PROBES, P.dim))
    margins = P.h - X @ P.H.T
    interior = X[np.all(margins > _PROBE_MARGIN, axis=1)]
    if interior.shape[0] == 0:
        return False
    covered = np.zeros(interior.shape[0], dtype=bool)
    for Q in others:
        rem = ~covered
        if not rem.any():
            break
        # loose containment: a point failing it violates some row by more
        # than the margin, hence sits strictly outside Q
        covered[rem] = Q.contains_batch(interior[rem], tol=_PROBE_MARGIN)
    return not covered.all()


def _overlap_order(P: HPolyhedron, others: list[HPolyhedron], tol: float) -> list[HPolyhedron]:
    """Cover pieces sorted by bbox-overlap volume with P, largest first.

    Deterministic: ties resolve by original index. Non-overlapping pieces
    are dropped outright.
    """
    pb = P.bbox()
    scored = []
    for idx, Q in enumerate(others):
        qb = Q.bbox()
        span = np.minimum(pb[1], qb[1]) - np.maximum(pb[0], qb[0])
        if np.any(span < -tol):
            continue
        scored.append((-float(np.prod(np.maximum(span, 0.0))), idx, Q))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [Q for _, _, Q in scored]


def _prune_pieces(pieces: list[HPolyhedron], containment: bool, tol: float) -> list[HPolyhedron]:
    """Bound the piece count without changing the union's point set.

    Deterministic passes in construction order: exact-duplicate keys,
    single-piece containment (bbox prefiltered), then union-level
    coverage (a piece covered by all the other survivors together is
    dropped). Pieces arrive row-reduced from intersect().
    """
    reduced: list[HPolyhedron] = []
    keys: set[bytes] = set()
    for p in pieces:
        key = canonical_key(p)
        if key in keys:
            continue
        keys.add(key)
        if containment:
            pb = p.bbox()
            swallowed = False
            for kp in reduced:
                kb = kp.bbox()
                if np.all(pb[0] >= kb[0] - tol) and np.all(pb[1] <= kb[1] + tol) \
                        and piece_contained(p, kp, tol):
                    swallowed = True
                    break
            if swallowed:
                continue
        reduced.append(p)
    if not containment or len(reduced) <= 1:
        return reduced

    alive = [True] * len(reduced)
    rng = np.random.Generator(np.random.Philox(0xC07E12))
    for j in range(len(reduced)):
        others = [reduced[i] for i in range(len(reduced)) if i != j and alive[i]]
        if not others:
            break
        others = _overlap_order(reduced[j], others, tol)
        if not others:
            continue
        if _probe_uncovered(reduced[j], others, rng):
            continue
        budget = [_COVERAGE_BUDGET]
        if _covered_by_union(reduced[j], others, _INTERIOR_TOL, budget):
            alive[j] = False
    return [p for p, a in zip(reduced, alive) if a]


def iterate(model: PWAModel, current: SafeSetIterate,
            working_box: Optional[HPolyhedron] = None, *,
            containment_prune: bool = True, prune_tol: float = 1e-9,
            max_workers: Optional[int] = None) -> SafeSetIterate:
    """One backward step over all (mode, target-piece) pairs.

    For each mode q and each piece i of the current union, the lifted
    pre-set is projected onto the state coordinates and intersected with
    every piece of the current union restricted to the mode region. Empty
    results are pruned; the union is assembled in (q, i, source) order.
    """
    if current.set.is_empty():
        raise RagkitError("cannot iterate from an empty safe set")
    box = working_box if working_box is not None else model.working_box
    n = model.state_dim
    x_dims = list(range(n))
    union = current.set

    sources: list[list[HPolyhedron]] = []
    for md in model.modes:
        region = intersect(md.region, box)
        if region.is_empty():
            sources.append([])
            continue
        restricted: list[HPolyhedron] = []
        seen: set[bytes] = set()
        for piece in union.pieces:
            s = intersect(piece, region)
            if s.is_empty():
                continue
            key = canonical_key(s)
            if key not in seen:
                seen.add(key)
                restricted.append(s)
        sources.append(restricted)

    tasks = [(q, i) for q in range(model.n_modes) if sources[q]
             for i in range(union.n_pieces)]

    def _backward(task):
        q, i = task
        pre = pre_piece(model, q, union.pieces[i], box)
        if pre.is_empty():
            return None
        proj = project(pre, x_dims)
        return None if proj.is_empty() else proj

    projected = map_ordered(_backward, tasks, max_workers)

    new_pieces: list[HPolyhedron] = []
    for (q, _i), controllable in zip(tasks, projected):
        if controllable is None:
            continue
        cbox = controllable.bbox()
        for src in sources[q]:
            if not _boxes_overlap(cbox, src.bbox(), prune_tol):
                continue
            cand = intersect(controllable, src)
            if not cand.is_empty():
                new_pieces.append(cand)
    new_pieces = _prune_pieces(new_pieces, containment_prune, prune_tol)
    new_union = PolyUnion(new_pieces, dim=n)
    counts = list(current.per_iteration_piece_counts) + [new_union.n_pieces]
    return SafeSetIterate(current.k + 1, new_union, counts,
                          warning_empty=new_union.is_empty())


def compute(model: PWAModel, X: PolyUnion, config: SafeSetConfig,
            out_path=None) -> SafeSetIterate:
    """Run the backward recursion k_max times from the constraint polygon.

    After every step, sample-checks that the new iterate is contained in
    the previous one (raising MonotonicityError with the witness point if
    not). With early_stop enabled, a mutual sampled inclusion ends the
    loop before k_max. When ``out_path`` is given the final iterate is
    serialized there together with its metadata.
    """
    if X.is_empty():
        raise RagkitError("initial constraint polygon is empty")
    if X.dim != model.state_dim:
        raise RagkitError("constraint polygon dimension must match the model")
    box = config.working_box
    pieces0 = [p for p in (intersect(piece, box) for piece in X.pieces)
               if not p.is_empty()]
    current = SafeSetIterate(0, PolyUnion(pieces0, dim=model.state_dim), [len(pieces0)])
    prev_keys = _union_keys(current.set)
    for k in range(1, config.k_max + 1):
        nxt = iterate(model, current, box,
                      containment_prune=config.containment_prune,
                      prune_tol=config.prune_tol,
                      max_workers=config.max_workers)
        if nxt.set.is_empty():
            current = nxt
            break
        evidence = sampled_subset(nxt.set, current.set,
                                  config.convergence_samples, config.seed + 7919 * k)
        if not evidence.is_subset_evidence:
            raise MonotonicityError(k, evidence.counterexample)
        keys = _union_keys(nxt.set)
        if keys == prev_keys:
            # exact fixed point: every further step reproduces the same
            # rows, so fast-forward the index and stop iterating
            counts = list(nxt.per_iteration_piece_counts)
            counts += [nxt.set.n_pieces] * (config.k_max - k)
            current = SafeSetIterate(config.k_max, nxt.set, counts)
            break
        if config.early_stop:
            back = sampled_subset(current.set, nxt.set,
                                  config.convergence_samples,
                                  config.seed + 7919 * k + 1)
            if back.is_subset_evidence:
                current = nxt
                break
        current = nxt
        prev_keys = keys
    if out_path is not None:
        save_iterate(current, out_path, model)
    return current


def _union_keys(union: PolyUnion) -> tuple:
    # ordered: iterate() is a deterministic function of the piece list,
    # so identical ordered keys imply an exact fixed point
    return tuple(canonical_key(p) for p in union.pieces)


def membership(iterate_: SafeSetIterate, x) -> bool:
    """True iff any piece of the iterate contains x."""
    return iterate_.set.contains(x)


def save_iterate(iterate_: SafeSetIterate, path, model: Optional[PWAModel] = None) -> None:
    doc = iterate_.set.to_json()
    doc["k"] = iterate_.k
    doc["piece_counts"] = list(iterate_.per_iteration_piece_counts)
    doc["model_hash"] = model_hash(model) if model is not None else None
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)


def load_iterate(path) -> tuple[SafeSetIterate, Optional[str]]:
    with open(path) as f:
        doc = json.load(f)
    union = PolyUnion.from_json(doc, where=str(path))
    if "k" not in doc:
        raise SchemaError(f"{path}.k", "missing field")
    counts = [int(c) for c in doc.get("piece_counts", [])]
    it = SafeSetIterate(int(doc["k"]), union, counts,
                        warning_empty=union.is_empty())
    return it, doc.get("model_hash")
