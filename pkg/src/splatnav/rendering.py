"""Observation rendering: CPU splat compositing plus hull ray casts.

RGB comes from the Gaussian cloud: each primitive is projected through the
pinhole model, its screen footprint is the 2-sigma ellipse of the projected
covariance, and pixels accumulate front-to-back as
C = sum_i c_i * a_i * prod_{j<i} (1 - a_j) with a_i = opacity * exp(-d^2/2)
at screen Mahalanobis distance d.  Depth and semantic labels come from one
ray cast per pixel against the collision hulls, so the two sources can
disagree by design at the pixel level.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RenderConfig
from .geometry import CollisionBody
from .scene import GaussianCloud

_EPS = 1e-12


@dataclass
class Camera:
    position: np.ndarray  # (3,)
    yaw: float            # rad, world z-up
    pitch: float          # rad, positive looks up
    width: int
    height: int
    vfov: float           # rad
    near: float = 0.05
    far: float = 50.0

    def __post_init__(self) -> None:
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if not (0 < self.vfov < np.pi):
            raise ValueError("vfov must be in (0, pi)")
        self.position = np.asarray(self.position, dtype=float)

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / np.tan(self.vfov / 2.0)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, down, forward) world-frame unit vectors."""
        cy, sy = np.cos(self.yaw), np.sin(self.yaw)
        cp, sp = np.cos(self.pitch), np.sin(self.pitch)
        forward = np.array([cp * cy, cp * sy, sp])
        right = np.array([sy, -cy, 0.0])
        down = np.cross(forward, right)
        return right, down, forward

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) unit world-space ray directions through pixel centers."""
        right, down, forward = self.axes()
        f = self.focal
        us = (np.arange(self.width) + 0.5 - self.width / 2.0) / f
        vs = (np.arange(self.height) + 0.5 - self.height / 2.0) / f
        uu, vv = np.meshgrid(us, vs)
        dirs = (
            uu[..., None] * right[None, None, :]
            + vv[..., None] * down[None, None, :]
            + forward[None, None, :]
        )
        return dirs / np.linalg.norm(dirs, axis=2, keepdims=True)

    @classmethod
    def from_agent(cls, position_xy, heading: float, camera_height: float, cfg: RenderConfig) -> "Camera":
        pos = np.array([position_xy[0], position_xy[1], camera_height])
        return cls(
            position=pos,
            yaw=float(heading),
            pitch=0.0,
            width=cfg.width,
            height=cfg.height,
            vfov=np.deg2rad(cfg.vfov_deg),
            near=cfg.near,
            far=cfg.far,
        )


@dataclass
class Frame:
    rgb: np.ndarray | None = None       # (H, W, 3) float in [0, 1]
    depth: np.ndarray | None = None     # (H, W) float, inf = no hit
    semantic: np.ndarray | None = None  # (H, W) int, 0 = background
    instance_ids: list[str] | None = None  # semantic value i maps to instance_ids[i-1]


def _quat_to_matrices(q: np.ndarray) -> np.ndarray:
    """(n, 4) wxyz unit quaternions -> (n, 3, 3) rotation matrices."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    out = np.empty((len(q), 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - w * z)
    out[:, 0, 2] = 2 * (x * z + w * y)
    out[:, 1, 0] = 2 * (x * y + w * z)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - w * x)
    out[:, 2, 0] = 2 * (x * z - w * y)
    out[:, 2, 1] = 2 * (y * z + w * x)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def render_rgb(camera: Camera, gaussians: GaussianCloud, tile: int = 16) -> np.ndarray:
    """Composite the splat cloud into an (H, W, 3) image on black.

    Primitives are projected, binned into tiles by their 2-sigma screen
    bounding box, sorted front-to-back by camera depth inside each tile,
    and accumulated with the transmittance product.  Output is independent
    of tile traversal order.
    """
    H, W = camera.height, camera.width
    image = np.zeros((H, W, 3), dtype=float)
    if len(gaussians) == 0:
        return image

    right, down, forward = camera.axes()
    R_wc = np.stack([right, down, forward])  # world -> camera rows
    rel = gaussians.means.astype(float) - camera.position[None, :]
    cam = rel @ R_wc.T  # (n, 3): x right, y down, z forward
    z = cam[:, 2]
    f = camera.focal
    cx, cy = W / 2.0, H / 2.0

    keep = (z > camera.near) & (z <= camera.far)
    if not keep.any():
        return image
    idx = np.nonzero(keep)[0]
    cam = cam[idx]
    z = z[idx]
    u = f * cam[:, 0] / z + cx
    v = f * cam[:, 1] / z + cy

    # screen-space covariance: J (R_wc Sigma R_wc^T) J^T, batched
    Rq = _quat_to_matrices(gaussians.rotations[idx].astype(float))
    M = np.einsum("ij,njk->nik", R_wc, Rq)
    s2 = gaussians.scales[idx].astype(float) ** 2
    cov_cam = np.einsum("nik,nk,njk->nij", M, s2, M)
    J = np.zeros((len(idx), 2, 3))
    J[:, 0, 0] = f / z
    J[:, 0, 2] = -f * cam[:, 0] / z**2
    J[:, 1, 1] = f / z
    J[:, 1, 2] = -f * cam[:, 1] / z**2
    cov2 = np.einsum("nab,nbc,ndc->nad", J, cov_cam, J)
    ca, cb, cc = cov2[:, 0, 0], cov2[:, 0, 1], cov2[:, 1, 1]
    det = ca * cc - cb * cb
    ok = (det > _EPS) & (ca > 0) & (cc > 0)

    ru = 2.0 * np.sqrt(np.where(ok, ca, 1.0))
    rv = 2.0 * np.sqrt(np.where(ok, cc, 1.0))
    x0 = np.maximum(0, np.floor(u - ru)).astype(int)
    x1 = np.minimum(W - 1, np.ceil(u + ru)).astype(int)
    y0 = np.maximum(0, np.floor(v - rv)).astype(int)
    y1 = np.minimum(H - 1, np.ceil(v + rv)).astype(int)
    ok &= (x1 >= x0) & (y1 >= y0)

    colors = gaussians.colors[idx].astype(float)
    alphas = gaussians.opacities[idx].astype(float)
    inv_a = np.where(ok, cc / np.where(ok, det, 1.0), 0.0)   # [0,0] of inverse
    inv_b = np.where(ok, -cb / np.where(ok, det, 1.0), 0.0)  # off diagonal
    inv_c = np.where(ok, ca / np.where(ok, det, 1.0), 0.0)   # [1,1]

    splats = [
        (float(z[k]), int(idx[k]), float(u[k]), float(v[k]),
         (float(inv_a[k]), float(inv_b[k]), float(inv_c[k])),
         (int(x0[k]), int(x1[k]), int(y0[k]), int(y1[k])),
         colors[k], float(alphas[k]))
        for k in range(len(idx)) if ok[k]
    ]
    if not splats:
        return image

    tiles_x = (W + tile - 1) // tile
    tiles_y = (H + tile - 1) // tile
    bins: dict[tuple[int, int], list] = {}
    for splat in splats:
        x0, x1, y0, y1 = splat[5]
        for ty in range(y0 // tile, y1 // tile + 1):
            for tx in range(x0 // tile, x1 // tile + 1):
                if 0 <= ty < tiles_y and 0 <= tx < tiles_x:
                    bins.setdefault((ty, tx), []).append(splat)

    for (ty, tx), items in bins.items():
        px0, py0 = tx * tile, ty * tile
        px1, py1 = min(px0 + tile, W), min(py0 + tile, H)
        xs = np.arange(px0, px1) + 0.5
        ys = np.arange(py0, py1) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        T = np.ones((py1 - py0, px1 - px0))
        C = np.zeros((py1 - py0, px1 - px0, 3))
        for zi, _, uu, vv, (ia, ib, ic), _, color, alpha in sorted(items, key=lambda s: (s[0], s[1])):
            du = gx - uu
            dv = gy - vv
            d2 = ia * du * du + 2.0 * ib * du * dv + ic * dv * dv
            a = np.where(d2 <= 4.0, alpha * np.exp(-0.5 * d2), 0.0)
            C += (T * a)[..., None] * color[None, None, :]
            T = T * (1.0 - a)
            if T.max() < 1e-4:
                break
        image[py0:py1, px0:px1] = C
    return np.clip(image, 0.0, 1.0)


def render_depth_semantic(
    camera: Camera, bodies: list[CollisionBody]
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Per-pixel hull ray cast.

    Returns (depth, semantic, instance_ids): depth is the forward (z)
    distance with inf where nothing is hit; semantic holds 1-based indices
    into instance_ids with 0 as background.
    """
    H, W = camera.height, camera.width
    dirs = camera.pixel_rays().reshape(-1, 3)
    _, _, forward = camera.axes()
    zfac = dirs @ forward
    origin = camera.position

    best_t = np.full(dirs.shape[0], np.inf)
    best_idx = np.zeros(dirs.shape[0], dtype=np.int32)
    ordered = sorted(bodies, key=lambda b: b.instance_id)
    for b_i, body in enumerate(ordered):
        for hull in body.hulls:
            A = dirs @ hull.normals.T                         # (P, F)
            B = (hull.offsets - hull.normals @ origin)[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                Tq = B / A
            entering = A < -_EPS
            exiting = A > _EPS
            parallel_miss = (~entering & ~exiting & (B < 0)).any(axis=1)
            lower = np.where(entering, Tq, -np.inf).max(axis=1)
            upper = np.where(exiting, Tq, np.inf).min(axis=1)
            t_lo = np.maximum(lower, 0.0)
            hit = ~parallel_miss & (t_lo <= upper) & (upper >= _EPS)
            t_hit = np.where(t_lo > _EPS, t_lo, upper)
            z_hit = t_hit * zfac
            ok = hit & (z_hit >= camera.near) & (z_hit <= camera.far) & (t_hit < best_t)
            best_t = np.where(ok, t_hit, best_t)
            best_idx = np.where(ok, b_i + 1, best_idx)

    depth = np.where(np.isfinite(best_t), best_t * zfac, np.inf).reshape(H, W)
    semantic = best_idx.reshape(H, W)
    return depth, semantic, [b.instance_id for b in ordered]


def render_frame(
    camera: Camera,
    gaussians: GaussianCloud | None,
    bodies: list[CollisionBody] | None,
    channels=("rgb", "depth", "semantic"),
    tile: int = 16,
) -> Frame:
    frame = Frame()
    if "rgb" in channels and gaussians is not None:
        frame.rgb = render_rgb(camera, gaussians, tile=tile)
    if ("depth" in channels or "semantic" in channels) and bodies is not None:
        depth, semantic, ids = render_depth_semantic(camera, bodies)
        if "depth" in channels:
            frame.depth = depth
        if "semantic" in channels:
            frame.semantic = semantic
        frame.instance_ids = ids
    return frame


def save_frame(frame: Frame, out_dir: str | Path, stem: str) -> list[Path]:
    """Debug dumps: PNG for rgb, 16-bit PNG for semantic, raw f32 for depth."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if frame.rgb is not None:
        img = Image.fromarray((np.clip(frame.rgb, 0, 1) * 255).round().astype(np.uint8))
        p = out_dir / f"{stem}_rgb.png"
        img.save(p)
        written.append(p)
    if frame.depth is not None:
        p = out_dir / f"{stem}_depth.f32"
        finite = np.where(np.isfinite(frame.depth), frame.depth, np.float32(np.finfo(np.float32).max))
        finite.astype("<f4").tofile(p)
        written.append(p)
    if frame.semantic is not None:
        img = Image.fromarray(frame.semantic.astype(np.uint16))
        p = out_dir / f"{stem}_semantic.png"
        img.save(p)
        written.append(p)
    return written
