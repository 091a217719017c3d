"""Synthetic bird's-eye depth rendering, occupancy grids and the egocentric window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import Pose2D, mask_inside
from .world import BodyState, WorldState, ROLE_EE, ROLE_PUSHEE

IMAGE_SIZE = 256
WINDOW_SIZE = 64

# Declared render heights (meters above the table) and the normalization cap.
BODY_HEIGHTS = {ROLE_PUSHEE: 0.04, "obstacle": 0.05, ROLE_EE: 0.08}
MAX_HEIGHT = 0.10


@dataclass
class DepthImage:
    values: np.ndarray  # (H, W) height above table, background exactly 0
    resolution: float   # meters per pixel
    origin: tuple[float, float]  # world coords of the outer corner of cell (0, 0)


@dataclass
class OccupancyGrid:
    cells: np.ndarray  # (H, W) bool, True = occupied
    resolution: float
    origin: tuple[float, float]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        c = int(np.floor((x - self.origin[0]) / self.resolution))
        r = int(np.floor((y - self.origin[1]) / self.resolution))
        return r, c

    def center_of(self, r: int, c: int) -> tuple[float, float]:
        return (self.origin[0] + (c + 0.5) * self.resolution,
                self.origin[1] + (r + 0.5) * self.resolution)

    def in_grid(self, r: int, c: int) -> bool:
        h, w = self.cells.shape
        return 0 <= r < h and 0 <= c < w

    def occupied_at(self, x: float, y: float) -> bool:
        r, c = self.cell_of(x, y)
        if not self.in_grid(r, c):
            return True  # outside the raster counts as blocked
        return bool(self.cells[r, c])


def _pixel_centers(resolution: float, origin, size: int):
    ax = origin[0] + (np.arange(size) + 0.5) * resolution
    ay = origin[1] + (np.arange(size) + 0.5) * resolution
    return np.meshgrid(ax, ay)  # xs[r, c], ys[r, c]


def paint_body(target: np.ndarray, body: BodyState, value: float,
               resolution: float, origin) -> None:
    """Set pixels whose center lies inside the body footprint (bbox-clipped)."""
    size = target.shape[0]
    rad = body.shape.circumradius
    c0 = max(0, int(np.floor((body.pose.x - rad - origin[0]) / resolution)))
    c1 = min(size, int(np.ceil((body.pose.x + rad - origin[0]) / resolution)) + 1)
    r0 = max(0, int(np.floor((body.pose.y - rad - origin[1]) / resolution)))
    r1 = min(size, int(np.ceil((body.pose.y + rad - origin[1]) / resolution)) + 1)
    if r0 >= r1 or c0 >= c1:
        return
    xs = origin[0] + (np.arange(c0, c1) + 0.5) * resolution
    ys = origin[1] + (np.arange(r0, r1) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    inside = mask_inside(body.shape, body.pose, gx, gy)
    patch = target[r0:r1, c0:c1]
    patch[inside] = np.maximum(patch[inside], value)


def render_depth(world: WorldState) -> DepthImage:
    """Rasterize all bodies into the 256x256 top-down height image."""
    res = world.bounds.extent_x / IMAGE_SIZE
    origin = (world.bounds.min_x, world.bounds.min_y)
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    for body in world.bodies:
        paint_body(img, body, BODY_HEIGHTS[body.role], res, origin)
    return DepthImage(values=img, resolution=res, origin=origin)


def _footprint_mask(depth: DepthImage, *bodies: BodyState) -> np.ndarray:
    mask = np.zeros(depth.values.shape, dtype=bool)
    helper = np.zeros_like(depth.values)
    for body in bodies:
        paint_body(helper, body, 1.0, depth.resolution, depth.origin)
    mask |= helper > 0.0
    return mask


def occupancy_from_depth(depth: DepthImage, pushee: BodyState, ee: BodyState) -> OccupancyGrid:
    """Binary obstacle map: occupied height pixels minus the pushee/EE footprints."""
    own = _footprint_mask(depth, pushee, ee)
    cells = (depth.values > 0.0) & ~own
    return OccupancyGrid(cells=cells, resolution=depth.resolution, origin=depth.origin)


def occupancy_from_world(world: WorldState) -> OccupancyGrid:
    return occupancy_from_depth(render_depth(world), world.pushee, world.ee)


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Grow the occupied set by a Euclidean radius (in meters).

    A cell becomes occupied iff its center lies within `radius` of the center
    of an originally occupied cell. Distances are compared in exact squared
    cell units so boundary cases are reproducible.
    """
    if radius < 0.0:
        raise ValueError("inflation radius must be >= 0")
    if not grid.cells.any() or radius == 0.0:
        return OccupancyGrid(grid.cells.copy(), grid.resolution, grid.origin)
    free = ~grid.cells
    _, (ni, nj) = ndimage.distance_transform_edt(free, return_indices=True)
    ii, jj = np.indices(grid.cells.shape)
    d2 = (ii - ni) ** 2 + (jj - nj) ** 2
    rpx = radius / grid.resolution
    cells = d2 <= rpx * rpx
    return OccupancyGrid(cells=cells, resolution=grid.resolution, origin=grid.origin)


@dataclass
class LocalWindow:
    values: np.ndarray  # (64, 64) normalized to [0, 1]
    center: tuple[float, float]
    orientation: float


def masked_depth(depth: DepthImage, pushee: BodyState, ee: BodyState) -> np.ndarray:
    """Depth values with the pushee and EE pixels set to the background."""
    own = _footprint_mask(depth, pushee, ee)
    out = depth.values.copy()
    out[own] = 0.0
    return out


def window_from_masked(src: np.ndarray, resolution: float, origin,
                       pushee_pose: Pose2D) -> LocalWindow:
    """Bilinear egocentric crop of an already-masked depth array."""
    half = WINDOW_SIZE / 2.0
    offs = (np.arange(WINDOW_SIZE) + 0.5 - half) * resolution
    wx, wy = np.meshgrid(offs, offs)  # window/body frame coordinates
    rot = pushee_pose.rotation()
    worldx = pushee_pose.x + rot[0, 0] * wx + rot[0, 1] * wy
    worldy = pushee_pose.y + rot[1, 0] * wx + rot[1, 1] * wy
    cols = (worldx - origin[0]) / resolution - 0.5
    rows = (worldy - origin[1]) / resolution - 0.5
    sampled = ndimage.map_coordinates(src, [rows, cols], order=1,
                                      mode="constant", cval=0.0)
    values = np.clip(sampled / MAX_HEIGHT, 0.0, 1.0)
    return LocalWindow(values=values, center=(pushee_pose.x, pushee_pose.y),
                       orientation=pushee_pose.theta)


def egocentric_window(depth: DepthImage, pushee: BodyState, ee: BodyState) -> LocalWindow:
    """64x64 crop centered on the pushee, rotated so its +x axis points right.

    The pushee and EE are erased before sampling; values are bilinearly
    resampled and normalized by the declared height cap. Samples outside the
    source image read as background.
    """
    src = masked_depth(depth, pushee, ee)
    return window_from_masked(src, depth.resolution, depth.origin, pushee.pose)


def save_pgm(grid: OccupancyGrid, path) -> None:
    """ASCII PGM (P2) debug export; occupied = 0 (black), top row = max y."""
    cells = np.flipud(grid.cells)
    h, w = cells.shape
    lines = [
        "P2",
        f"# resolution {grid.resolution!r} origin {grid.origin[0]!r} {grid.origin[1]!r}",
        f"{w} {h}",
        "255",
    ]
    for row in cells:
        lines.append(" ".join("0" if v else "255" for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_pgm(path) -> OccupancyGrid:
    with open(path) as f:
        raw = f.read()
    resolution, ox, oy = 1.0, 0.0, 0.0
    tokens = []
    for line in raw.splitlines():
        if line.startswith("#"):
            parts = line.split()
            if "resolution" in parts:
                resolution = float(parts[parts.index("resolution") + 1])
            if "origin" in parts:
                i = parts.index("origin")
                ox, oy = float(parts[i + 1]), float(parts[i + 2])
            continue
        tokens.extend(line.split())
    if tokens[0] != "P2":
        raise ValueError("only ASCII PGM (P2) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    vals = np.array(tokens[4:4 + w * h], dtype=int).reshape(h, w)
    cells = np.flipud(vals == 0)
    return OccupancyGrid(cells=cells, resolution=resolution, origin=(ox, oy))
