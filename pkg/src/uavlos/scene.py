"""Synthetic urban patches built from the three ITU-style built-up parameters.

A patch is a square of side ``patch_side`` meters containing square buildings
laid out on a regular grid.  The layout is controlled by

* ``alpha``  fraction of ground covered by buildings (0 < alpha < 1),
* ``beta``   buildings per square kilometer,
* ``gamma``  Rayleigh scale of the building-height distribution, meters.

Grid pitch is 1/sqrt(beta) km and every building is a square of side
sqrt(alpha/beta) km, so built density matches alpha by construction.
Positions are deterministic; only the heights are random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ItuParams",
    "Building",
    "UrbanScene",
    "ENVIRONMENT_PRESETS",
    "rayleigh_height",
    "generate_scene",
    "scene_to_csv",
    "scene_from_csv",
]


@dataclass(frozen=True)
class ItuParams:
    """Built-up area parameters plus the patch geometry they apply to.

    Units: ``beta`` is per square kilometer, ``gamma`` and ``patch_side``
    are meters.  ``d_correction`` is the additive floor of the same-street
    shortcut probability and stays in [0, 1).
    """

    alpha: float
    beta: float
    gamma: float
    d_correction: float = 0.05
    patch_side: float = 775.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 <= self.d_correction < 1.0:
            raise ValueError(
                f"d_correction must lie in [0, 1), got {self.d_correction}"
            )
        if self.patch_side <= 0.0:
            raise ValueError(f"patch_side must be positive, got {self.patch_side}")

    @property
    def building_side(self) -> float:
        """Side of one building footprint, meters."""
        return 1000.0 * math.sqrt(self.alpha / self.beta)

    @property
    def grid_pitch(self) -> float:
        """Spacing between neighbouring building centers, meters."""
        return 1000.0 / math.sqrt(self.beta)

    @property
    def patch_area_km2(self) -> float:
        return (self.patch_side / 1000.0) ** 2


@dataclass(frozen=True)
class Building:
    """Axis-aligned square building, all lengths in meters."""

    center_x: float
    center_y: float
    half_side: float
    height: float

    def __post_init__(self) -> None:
        if self.half_side <= 0.0:
            raise ValueError("half_side must be positive")
        if self.height < 0.0:
            raise ValueError("height must be nonnegative")


@dataclass(frozen=True)
class UrbanScene:
    """One generated patch: immutable building list plus its parameters."""

    params: ItuParams
    buildings: tuple[Building, ...]
    seed: int

    # Flat coordinate arrays, filled once in __post_init__ and reused by the
    # vectorized LOS kernels.
    centers_x: np.ndarray = field(repr=False, default=None)
    centers_y: np.ndarray = field(repr=False, default=None)
    half_sides: np.ndarray = field(repr=False, default=None)
    heights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        cx = np.array([b.center_x for b in self.buildings], dtype=float)
        cy = np.array([b.center_y for b in self.buildings], dtype=float)
        hs = np.array([b.half_side for b in self.buildings], dtype=float)
        hh = np.array([b.height for b in self.buildings], dtype=float)
        for arr in (cx, cy, hs, hh):
            arr.flags.writeable = False
        object.__setattr__(self, "centers_x", cx)
        object.__setattr__(self, "centers_y", cy)
        object.__setattr__(self, "half_sides", hs)
        object.__setattr__(self, "heights", hh)

    @property
    def patch_side(self) -> float:
        return self.params.patch_side

    @property
    def n_buildings(self) -> int:
        return len(self.buildings)

    def coverage_ratio(self) -> float:
        """Built area divided by patch area."""
        if not self.buildings:
            return 0.0
        area = float(np.sum((2.0 * self.half_sides) ** 2))
        return area / self.params.patch_side**2

    def max_height(self) -> float:
        return float(self.heights.max()) if self.buildings else 0.0

    def contains_point(self, x: float, y: float) -> bool:
        """True when (x, y) falls inside or on the edge of any footprint."""
        if not self.buildings:
            return False
        inside = (np.abs(x - self.centers_x) <= self.half_sides) & (
            np.abs(y - self.centers_y) <= self.half_sides
        )
        return bool(inside.any())


# Parameter triples (alpha, beta, gamma) for the four standard environment
# classes, handy for qualitative comparisons and CLI demos.
ENVIRONMENT_PRESETS: dict[str, tuple[float, float, float]] = {
    "suburban": (0.1, 750.0, 8.0),
    "urban": (0.3, 500.0, 15.0),
    "dense-urban": (0.5, 300.0, 20.0),
    "highrise": (0.5, 300.0, 50.0),
}


def rayleigh_height(gamma: float, u) -> float | np.ndarray:
    """Map uniforms u in [0, 1) to Rayleigh(gamma) heights by inverse CDF.

    gamma is the Rayleigh scale in meters.  u = 0 gives height 0 and the
    distribution mean is gamma * sqrt(pi / 2).
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0.0) | (u_arr >= 1.0)):
        raise ValueError("u must lie in [0, 1)")
    out = gamma * np.sqrt(-2.0 * np.log1p(-u_arr))
    return out if isinstance(u, np.ndarray) else float(out)


def generate_scene(params: ItuParams, seed: int) -> UrbanScene:
    """Generate a deterministic patch for the given parameters and seed.

    The number of buildings is round(beta * patch area in km2), placed
    row-major on a regular grid of pitch 1/sqrt(beta); when the target count
    is not a perfect square the top row is left partially filled.  The grid
    block is centered in the patch when it fits with footprints wholly
    inside; for awkward patch sizes the pitch is compressed just enough to
    keep all footprints inside, preserving the exact count.  Heights are
    i.i.d. Rayleigh(gamma) drawn in placement order.
    """
    area_km2 = params.patch_area_km2
    if params.beta * area_km2 < 1.0:
        raise ValueError(
            "patch too small: beta * area must cover at least one building"
        )
    side = params.building_side
    pitch = params.grid_pitch
    a = params.patch_side
    if side > a:
        raise ValueError("patch too small: building side exceeds patch side")

    n_target = int(round(params.beta * area_km2))
    n_axis = math.isqrt(n_target)
    if n_axis * n_axis < n_target:
        n_axis += 1

    span = (n_axis - 1) * pitch + side
    if span <= a:
        start = (a - span) / 2.0 + side / 2.0
        step = pitch
    else:
        # Not enough room for the last row at nominal pitch; compress a
        # little instead of dropping buildings so the count stays exact.
        if n_axis < 2:
            raise ValueError("patch too small for the requested density")
        step = (a - side) / (n_axis - 1)
        start = side / 2.0
        if step <= side:
            raise ValueError(
                "parameters leave no street gap: buildings would overlap"
            )

    rng = np.random.default_rng(seed)
    u = rng.random(n_target)
    heights = rayleigh_height(params.gamma, u)

    half = side / 2.0
    buildings = []
    for k in range(n_target):
        row, col = divmod(k, n_axis)
        buildings.append(
            Building(
                center_x=start + col * step,
                center_y=start + row * step,
                half_side=half,
                height=float(heights[k]),
            )
        )
    return UrbanScene(params=params, buildings=tuple(buildings), seed=seed)


_CSV_HEADER = "center_x_m,center_y_m,half_side_m,height_m"


def _fmt(v: float) -> str:
    """Render a number at 6 significant digits, the package-wide CSV format."""
    return f"{v:.6g}"


def scene_to_csv(scene: UrbanScene, path: str | Path) -> None:
    """Write a scene to CSV with a parameter comment line, one building per row."""
    p = scene.params
    lines = [
        f"# patch_side_m={_fmt(p.patch_side)} alpha={_fmt(p.alpha)} "
        f"beta_per_km2={_fmt(p.beta)} gamma_m={_fmt(p.gamma)} seed={scene.seed}",
        _CSV_HEADER,
    ]
    for b in scene.buildings:
        lines.append(
            f"{_fmt(b.center_x)},{_fmt(b.center_y)},{_fmt(b.half_side)},{_fmt(b.height)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def scene_from_csv(path: str | Path) -> UrbanScene:
    """Read a scene written by scene_to_csv.

    d_correction is not stored in the file, so the reconstructed parameters
    carry its default value.
    """
    text = Path(path).read_text()
    meta: dict[str, str] = {}
    buildings = []
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, val = token.split("=", 1)
                    meta[key] = val
            continue
        if not header_seen:
            if line != _CSV_HEADER:
                raise ValueError(f"line {line_no}: unexpected header {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"line {line_no}: expected 4 fields, got {len(parts)}")
        try:
            cx, cy, hs, h = (float(v) for v in parts)
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
        buildings.append(Building(cx, cy, hs, h))
    required = ("patch_side_m", "alpha", "beta_per_km2", "gamma_m", "seed")
    missing = [k for k in required if k not in meta]
    if missing:
        raise ValueError(f"scene file missing metadata keys: {missing}")
    params = ItuParams(
        alpha=float(meta["alpha"]),
        beta=float(meta["beta_per_km2"]),
        gamma=float(meta["gamma_m"]),
        patch_side=float(meta["patch_side_m"]),
    )
    return UrbanScene(
        params=params, buildings=tuple(buildings), seed=int(meta["seed"])
    )
