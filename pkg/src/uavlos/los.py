"""Exact line-of-sight testing of 3D links against square building prisms.

A link is the straight segment between two hovering endpoints.  Blockage is
decided in two steps: clip the link's ground projection against the building
footprint (2D slab method), then compare the building height with the link
height over the crossed stretch.  The link height is linear, so the minimum
over the stretch sits at one of the two crossing parameters.  Ties count as
blocked.

Scalar functions operate on one link at a time and are the reference
semantics.  The _batch helpers at the bottom evaluate many links or many
receiver points against a whole scene and must agree with the scalar path
bit for bit; they exist only for speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Building, UrbanScene

__all__ = [
    "Link",
    "footprint_crossing",
    "is_blocked_by",
    "is_los",
    "count_crossed_buildings",
    "los_mask",
    "crossing_counts",
    "CrossingProfile",
    "crossing_profile",
    "blocked_states",
]


@dataclass(frozen=True)
class Link:
    """Straight 3D segment between transmitter and receiver, meters."""

    tx_x: float
    tx_y: float
    tx_h: float
    rx_x: float
    rx_y: float
    rx_h: float

    def __post_init__(self) -> None:
        if self.tx_h < 0.0 or self.rx_h < 0.0:
            raise ValueError("endpoint heights must be nonnegative")

    def reversed(self) -> "Link":
        return Link(self.rx_x, self.rx_y, self.rx_h, self.tx_x, self.tx_y, self.tx_h)

    def height_at(self, t: float) -> float:
        """Link height at fractional position t, t = 0 at the transmitter."""
        return self.tx_h + t * (self.rx_h - self.tx_h)


def _axis_range(p0: float, d: float, lo: float, hi: float) -> tuple[float, float]:
    # Parameter interval where p0 + t*d stays inside [lo, hi]; empty as (inf, -inf).
    if d == 0.0:
        if lo <= p0 <= hi:
            return (-np.inf, np.inf)
        return (np.inf, -np.inf)
    t1 = (lo - p0) / d
    t2 = (hi - p0) / d
    return (t1, t2) if t1 <= t2 else (t2, t1)


def footprint_crossing(
    link: Link, building: Building
) -> tuple[float, float] | None:
    """Fractional interval of the link's ground track inside the footprint.

    Returns (t_in, t_out) with 0 <= t_in <= t_out <= 1, or None when the
    projection misses the footprint.  A zero-length link whose ground point
    lies inside the footprint yields (0, 1).
    """
    dx = link.rx_x - link.tx_x
    dy = link.rx_y - link.tx_y
    x_lo, x_hi = _axis_range(
        link.tx_x,
        dx,
        building.center_x - building.half_side,
        building.center_x + building.half_side,
    )
    y_lo, y_hi = _axis_range(
        link.tx_y,
        dy,
        building.center_y - building.half_side,
        building.center_y + building.half_side,
    )
    t_in = max(x_lo, y_lo, 0.0)
    t_out = min(x_hi, y_hi, 1.0)
    if t_in > t_out:
        return None
    return (t_in, t_out)


def is_blocked_by(link: Link, building: Building) -> bool:
    """True when the building intersects the 3D segment (ties block)."""
    crossing = footprint_crossing(link, building)
    if crossing is None:
        return False
    t_in, t_out = crossing
    low = min(link.height_at(t_in), link.height_at(t_out))
    return building.height >= low


def is_los(scene: UrbanScene, link: Link) -> bool:
    """True when no building in the scene blocks the link."""
    for building in scene.buildings:
        if is_blocked_by(link, building):
            return False
    return True


def count_crossed_buildings(scene: UrbanScene, link: Link) -> int:
    """Number of footprints the ground track crosses, heights ignored."""
    n = 0
    for building in scene.buildings:
        if footprint_crossing(link, building) is not None:
            n += 1
    return n


# ---------------------------------------------------------------------------
# Vectorized kernels.


def _interval_arrays(scene, x0, y0, x1, y1):
    """Crossing intervals of each link (rows) against each building (cols).

    Returns (t_in, t_out); a pair crosses where t_in <= t_out.  Mirrors
    _axis_range including the degenerate zero-delta case.
    """
    bx = scene.centers_x[np.newaxis, :]
    by = scene.centers_y[np.newaxis, :]
    bh = scene.half_sides[np.newaxis, :]
    x0 = x0[:, np.newaxis]
    y0 = y0[:, np.newaxis]
    dx = x1[:, np.newaxis] - x0
    dy = y1[:, np.newaxis] - y0

    t_in = np.zeros(np.broadcast_shapes(dx.shape, bx.shape))
    t_out = np.ones_like(t_in)
    for p0, d, lo, hi in (
        (x0, dx, bx - bh, bx + bh),
        (y0, dy, by - bh, by + bh),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - p0) / d
            t2 = (hi - p0) / d
        a_lo = np.minimum(t1, t2)
        a_hi = np.maximum(t1, t2)
        zero = d == 0.0
        if np.any(zero):
            inside = (p0 >= lo) & (p0 <= hi)
            a_lo = np.where(zero, np.where(inside, -np.inf, np.inf), a_lo)
            a_hi = np.where(zero, np.where(inside, np.inf, -np.inf), a_hi)
        np.maximum(t_in, a_lo, out=t_in)
        np.minimum(t_out, a_hi, out=t_out)
    return t_in, t_out


_CHUNK = 8192


def los_mask(
    scene: UrbanScene,
    x0: np.ndarray,
    y0: np.ndarray,
    h0,
    x1: np.ndarray,
    y1: np.ndarray,
    h1,
) -> np.ndarray:
    """Boolean LOS flag per link; endpoint heights scalar or per-link arrays."""
    n = len(x0)
    if scene.n_buildings == 0:
        return np.ones(n, dtype=bool)
    h0 = np.broadcast_to(np.asarray(h0, dtype=float), (n,))
    h1 = np.broadcast_to(np.asarray(h1, dtype=float), (n,))
    heights = scene.heights[np.newaxis, :]
    out = np.empty(n, dtype=bool)
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        t_in, t_out = _interval_arrays(scene, x0[s:e], y0[s:e], x1[s:e], y1[s:e])
        dh = (h1[s:e] - h0[s:e])[:, np.newaxis]
        base = h0[s:e][:, np.newaxis]
        low = np.minimum(base + t_in * dh, base + t_out * dh)
        blocked = (t_in <= t_out) & (heights >= low)
        out[s:e] = ~blocked.any(axis=1)
    return out


def crossing_counts(
    scene: UrbanScene, x0: np.ndarray, y0: np.ndarray, x1: np.ndarray, y1: np.ndarray
) -> np.ndarray:
    """Crossed-footprint count per link, heights ignored."""
    n = len(x0)
    if scene.n_buildings == 0:
        return np.zeros(n, dtype=int)
    out = np.empty(n, dtype=int)
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        t_in, t_out = _interval_arrays(scene, x0[s:e], y0[s:e], x1[s:e], y1[s:e])
        out[s:e] = (t_in <= t_out).sum(axis=1)
    return out


@dataclass(frozen=True)
class CrossingProfile:
    """Sparse crossing geometry of many receiver points against one scene.

    One entry per (point, crossed building): the point index, the two
    crossing parameters and the building height.  Heights enter only later,
    so one profile serves every endpoint-height combination.
    """

    n_points: int
    point_idx: np.ndarray
    t_in: np.ndarray
    t_out: np.ndarray
    building_height: np.ndarray


def crossing_profile(
    scene: UrbanScene, tx_x: float, tx_y: float, px: np.ndarray, py: np.ndarray
) -> CrossingProfile:
    """Crossing geometry of links from one fixed ground point to many points."""
    n = len(px)
    idx_parts = []
    tin_parts = []
    tout_parts = []
    hgt_parts = []
    if scene.n_buildings:
        x0 = np.full(n, float(tx_x))
        y0 = np.full(n, float(tx_y))
        for s in range(0, n, _CHUNK):
            e = min(s + _CHUNK, n)
            t_in, t_out = _interval_arrays(scene, x0[s:e], y0[s:e], px[s:e], py[s:e])
            rows, cols = np.nonzero(t_in <= t_out)
            idx_parts.append(rows + s)
            tin_parts.append(t_in[rows, cols])
            tout_parts.append(t_out[rows, cols])
            hgt_parts.append(scene.heights[cols])
    empty = np.empty(0)
    return CrossingProfile(
        n_points=n,
        point_idx=np.concatenate(idx_parts) if idx_parts else empty.astype(int),
        t_in=np.concatenate(tin_parts) if tin_parts else empty,
        t_out=np.concatenate(tout_parts) if tout_parts else empty,
        building_height=np.concatenate(hgt_parts) if hgt_parts else empty,
    )


def blocked_states(profile: CrossingProfile, tx_h: float, rx_h: float) -> np.ndarray:
    """LOS state per point (1 = LOS) for one endpoint-height pair.

    Uses the same height comparison as los_mask: a crossed building blocks
    when its height reaches the lower of the two crossing-point link heights.
    """
    dh = rx_h - tx_h
    low = np.minimum(tx_h + profile.t_in * dh, tx_h + profile.t_out * dh)
    blocked_entry = profile.building_height >= low
    blocked = (
        np.bincount(
            profile.point_idx[blocked_entry], minlength=profile.n_points
        )
        > 0
    )
    return (~blocked).astype(np.int8)
