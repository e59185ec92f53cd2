"""Mass-spring-damper soft-landing benchmark.

A point mass slides between the spring anchor and a wall at distance d
under a nonnegative attracting force. The spring is piecewise linear
(stiffness switches at |x| = x_m), the mass is unknown within
[m_min, m_max] (handled as simplex-weighted vertex systems over 1/m),
and a bounded force disturbance acts through the same channel as the
input. Safety: stay right of the origin and approach the wall inside a
velocity funnel that narrows to +-eps_land at contact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import RagkitError
from .geometry import HPolyhedron, PolyUnion
from .pwa import Disturbance, ModeDef, PWAModel


@dataclass(frozen=True)
class MsdParams:
    """Physical constants, constraint geometry and actuator limits.

    beta is stored as a magnitude: the funnel half-width
    eps_land + beta * (d - x) must widen as the mass moves away from the
    wall, and at x = x_c it roughly meets v_max.
    """

    c: float = 0.8
    x_m: float = 1.75
    k1: float = 1.0
    k2: float = 0.8
    T_s: float = 0.1
    d: float = 5.0
    v_max: float = 5.0
    F_max: float = 10.0
    x_c: float = 3.3
    eps_land: float = 0.5
    beta: float = 2.95
    m_min: float = 0.5
    m_max: float = 1.5
    wa_bound: float = 1.0

    def __post_init__(self):
        positives = ("c", "x_m", "k1", "k2", "T_s", "d", "v_max", "F_max",
                     "x_c", "eps_land", "beta", "m_min", "m_max", "wa_bound")
        for name in positives:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.x_c >= self.d:
            raise ValueError("x_c must lie strictly before the wall d")
        if self.eps_land >= self.v_max:
            raise ValueError("eps_land must be below v_max")
        if self.m_min > self.m_max:
            raise ValueError("m_min must not exceed m_max")


@dataclass(frozen=True)
class MsdVariant:
    """Plant overrides for the adaptation experiment."""

    m: float = 1.3
    d: float = 5.5

    def apply(self, base: MsdParams) -> MsdParams:
        if not (base.m_min <= self.m <= base.m_max):
            raise ValueError("variant mass must stay inside the uncertainty range")
        return replace(base, d=self.d)


DEFAULT_WORKING_BOX_LO = (-1.0, -8.0)
DEFAULT_WORKING_BOX_HI = (7.0, 8.0)


def build_model(params: MsdParams, working_box: HPolyhedron | None = None) -> PWAModel:
    """Discrete-time PWA model: 3 spring modes x 2 mass vertex systems.

    Vertex system j=0 uses m_min, j=1 uses m_max (the uncertainty is
    affine in 1/m). The input and the additive disturbance enter through
    the same T_s/m channel.
    """
    p = params
    if working_box is None:
        working_box = HPolyhedron.box(DEFAULT_WORKING_BOX_LO, DEFAULT_WORKING_BOX_HI)
    masses = (p.m_min, p.m_max)
    # (spring stiffness, sign of the affine spring-force offset)
    mode_springs = ((p.k1, 0.0), (p.k2, -1.0), (p.k2, +1.0))
    regions = (
        HPolyhedron([[1.0, 0.0], [-1.0, 0.0]], [p.x_m, p.x_m]),   # |x| <= x_m
        HPolyhedron([[-1.0, 0.0]], [-p.x_m]),                      # x >= x_m
        HPolyhedron([[1.0, 0.0]], [-p.x_m]),                       # x <= -x_m
    )
    U = HPolyhedron([[1.0], [-1.0]], [p.F_max, 0.0])
    Wa = HPolyhedron([[1.0], [-1.0]], [p.wa_bound, p.wa_bound])
    modes = []
    for (k_spring, f_sign), region in zip(mode_springs, regions):
        A_list, B_list, f_list, E_list = [], [], [], []
        for m in masses:
            a = p.T_s / m
            A_list.append(np.array([[1.0, p.T_s],
                                    [-k_spring * a, 1.0 - p.c * a]]))
            B_list.append(np.array([[0.0], [a]]))
            E_list.append(np.array([[0.0], [a]]))
            f_list.append(np.array([0.0, f_sign * a * (p.k1 - p.k2) * p.x_m]))
        modes.append(ModeDef(region=region, A_list=tuple(A_list), B_list=tuple(B_list),
                             f_list=tuple(f_list), E_list=tuple(E_list), U=U, Wa=Wa))
    return PWAModel(modes, working_box)


def build_constraint_polygon(params: MsdParams) -> PolyUnion:
    """Non-convex safe region: cruise box plus soft-landing funnel.

    Piece 0: 0 <= x <= x_c with |xdot| <= v_max. Piece 1: x_c <= x <= d
    with |xdot| <= eps_land + beta * (d - x).
    """
    p = params
    cruise = HPolyhedron(
        [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        [0.0, p.x_c, p.v_max, p.v_max],
    )
    # xdot <= eps + beta * (d - x)  <=>  beta * x + xdot <= eps + beta * d
    funnel = HPolyhedron(
        [[-1.0, 0.0], [1.0, 0.0], [p.beta, 1.0], [p.beta, -1.0]],
        [-p.x_c, p.d, p.eps_land + p.beta * p.d, p.eps_land + p.beta * p.d],
    )
    return PolyUnion([cruise, funnel])


def funnel_half_width(params: MsdParams, x: float) -> float:
    """Velocity envelope half-width at position x.

    Past the wall the funnel formula keeps shrinking (and goes negative),
    which marks every x > d as violating.
    """
    if x >= params.x_c:
        return params.eps_land + params.beta * (params.d - x)
    return params.v_max


def soft_landing_violated(params: MsdParams, state) -> bool:
    """True iff the velocity constraint fails at the current position."""
    x, xdot = float(state[0]), float(state[1])
    return abs(xdot) > funnel_half_width(params, x)


def in_constraint_set(params: MsdParams, state, tol: float = 1e-9) -> bool:
    """Direct evaluation of the safe region (position band + velocity envelope)."""
    x, xdot = float(state[0]), float(state[1])
    if x < -tol or x > params.d + tol:
        return False
    if x <= params.x_c + tol and abs(xdot) <= params.v_max + tol:
        return True
    if x >= params.x_c - tol and abs(xdot) <= params.eps_land + params.beta * (params.d - x) + tol:
        return True
    return False


def velocity_bound(params: MsdParams, x: float, xdot: float) -> float:
    """Closest velocity-envelope value for the current position and direction."""
    half = funnel_half_width(params, x)
    return half if xdot > 0 else -half


def reward(params: MsdParams, state, u, x_ref: float,
           w1: float = 1.0, w2: float = 1.0) -> float:
    """Tracking penalty plus a velocity-envelope violation penalty.

    The control input is part of the transition, not the score, so ``u``
    does not enter the formula.
    """
    x, xdot = float(state[0]), float(state[1])
    r1 = -(x - x_ref) ** 2
    if soft_landing_violated(params, state):
        vb = velocity_bound(params, x, xdot)
        r2 = -(xdot - vb) ** 2
    else:
        r2 = 0.0
    return w1 * r1 + w2 * r2


def adversarial_disturbance(params: MsdParams, state) -> Disturbance:
    """Worst-case heuristic: push along the motion with the lightest mass.

    wa takes the bound value signed like the velocity (ties resolve to
    +), wp selects the m_min vertex system, which maximizes acceleration.
    """
    xdot = float(state[1])
    wa = params.wa_bound if xdot >= 0 else -params.wa_bound
    return Disturbance(np.array([1.0, 0.0]), np.array([wa]))


def wp_for_mass(params: MsdParams, m: float) -> np.ndarray:
    """Simplex weights realizing a given mass through the 1/m blend."""
    if not (params.m_min <= m <= params.m_max):
        raise RagkitError(f"mass {m} outside [{params.m_min}, {params.m_max}]")
    inv_lo, inv_hi = 1.0 / params.m_max, 1.0 / params.m_min
    w1 = (1.0 / m - inv_lo) / (inv_hi - inv_lo)
    return np.array([w1, 1.0 - w1])
