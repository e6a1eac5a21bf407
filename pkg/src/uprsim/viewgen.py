"""Where scene content appears on the handheld display under each rendering
mode, and where a user perceives displayed content on the scene surface.

Render modes:
  DPR   - content drawn where the back camera sees it (device perspective).
  UPR   - content drawn on the eye-to-target line (user perspective).
  FUPR  - UPR with a fixed, once-calibrated eye on the display's center axis.
  AAUPR - same projection math as UPR; differs only in which eye estimate
          it is handed (scheduler-gated instead of per-frame).

Pointing error is the on-plane Euclidean distance between a target and the
point a user (looking from the true eye position) perceives the drawn target
to be at. The perceived point is the true-eye ray through the drawn pixel;
no motor noise term is added.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DegenerateViewError,
    DisplayModel,
    EyeState,
    GeometryError,
    PinholeCamera,
    Ray,
    ScenePlane,
    intersect_ray_plane,
    project_pinhole,
    unproject_ray,
)


class RenderMode(enum.Enum):
    DPR = "DPR"
    UPR = "UPR"
    FUPR = "FUPR"
    AAUPR = "AAUPR"


class FitPolicy(enum.Enum):
    """How the back-camera image is mapped onto the display."""

    STRETCH = "stretch"
    LETTERBOX = "letterbox"


@dataclass(frozen=True)
class FuprCalibration:
    """One-time head-to-device distance; the implied eye sits on the
    perpendicular through the display center and is never updated."""

    distance_mm: float

    def __post_init__(self):
        if self.distance_mm <= 0:
            raise ValueError("calibration distance must be positive")


def fupr_eye(cal: FuprCalibration, ipd_mm: float = 63.0) -> EyeState:
    return EyeState.from_cyclopean([0.0, 0.0, cal.distance_mm], ipd_mm=ipd_mm)


@dataclass(frozen=True)
class Homography:
    """3x3 planar homography, defined up to scale."""

    h: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.h, dtype=float).reshape(3, 3)
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateViewError("homography is singular")
        m.flags.writeable = False
        object.__setattr__(self, "h", m)

    def apply(self, pts) -> np.ndarray:
        p = np.asarray(pts, dtype=float)
        ones = np.ones(p.shape[:-1] + (1,))
        q = np.concatenate([p, ones], axis=-1) @ self.h.T
        return q[..., :2] / q[..., 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))


def _homography_from_points(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Exact homography from four point correspondences (DLT, 8x8 solve)."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateViewError("degenerate display/plane configuration") from exc
    return Homography(np.append(sol, 1.0).reshape(3, 3))


def _eye_ray_through_panel(eye_world: np.ndarray, display: DisplayModel, px) -> Ray:
    panel_world = display.pose_world.apply(display.px_to_mm(px))
    return Ray(eye_world, panel_world - eye_world)


def upr_display_to_plane(eye: EyeState, display: DisplayModel, plane: ScenePlane) -> Homography:
    """Homography taking display pixels to 2D scene-plane coordinates (mm)
    under user-perspective rendering from the cyclopean eye.

    Built from the four display-corner rays; since the eye is a center of
    projection between two planes, four correspondences determine the map
    exactly. Raises when any corner ray misses the plane forward.
    """
    eye_world = display.pose_world.apply(eye.cyclopean_mm)
    corners_px = display.corners_px()
    dst = []
    for px in corners_px:
        hit = intersect_ray_plane(_eye_ray_through_panel(eye_world, display, px), plane)
        if hit is None:
            raise DegenerateViewError("display corner ray misses the scene plane")
        dst.append(plane.to_plane_2d(hit))
    return _homography_from_points(corners_px, np.array(dst))


def display_px_to_cam_px(display_px, display: DisplayModel, cam: PinholeCamera,
                         fit: FitPolicy = FitPolicy.STRETCH) -> np.ndarray:
    """Which camera pixel is shown at a display pixel under the fit policy."""
    p = np.asarray(display_px, dtype=float)
    if fit is FitPolicy.STRETCH:
        return p * [cam.width_px / display.width_px, cam.height_px / display.height_px]
    s = min(cam.width_px / display.width_px, cam.height_px / display.height_px)
    disp_c = np.array([display.width_px / 2.0, display.height_px / 2.0])
    cam_c = np.array([cam.cx, cam.cy])
    return s * (p - disp_c) + cam_c


def cam_px_to_display_px(cam_px, display: DisplayModel, cam: PinholeCamera,
                         fit: FitPolicy = FitPolicy.STRETCH) -> np.ndarray:
    p = np.asarray(cam_px, dtype=float)
    if fit is FitPolicy.STRETCH:
        return p / [cam.width_px / display.width_px, cam.height_px / display.height_px]
    s = min(cam.width_px / display.width_px, cam.height_px / display.height_px)
    disp_c = np.array([display.width_px / 2.0, display.height_px / 2.0])
    cam_c = np.array([cam.cx, cam.cy])
    return (p - cam_c) / s + disp_c


@dataclass(frozen=True)
class DprMapping:
    """Display pixel -> plane point under device-perspective rendering:
    display px -> back-camera px (fit policy) -> unprojected ray -> plane."""

    back_cam: PinholeCamera
    display: DisplayModel
    plane: ScenePlane
    fit: FitPolicy = FitPolicy.STRETCH

    def plane_point(self, display_px) -> np.ndarray | None:
        cam_px = display_px_to_cam_px(display_px, self.display, self.back_cam, self.fit)
        ray_cam = unproject_ray(self.back_cam, cam_px)
        cam_to_display = self.back_cam.extrinsic.invert()
        origin = self.display.pose_world.apply(cam_to_display.apply(ray_cam.origin))
        direction = self.display.pose_world.apply_direction(
            cam_to_display.apply_direction(ray_cam.direction))
        hit = intersect_ray_plane(Ray(origin, direction), self.plane)
        if hit is None:
            return None
        return self.plane.to_plane_2d(hit)


def dpr_display_to_plane(back_cam: PinholeCamera, display: DisplayModel,
                         plane: ScenePlane, fit: FitPolicy = FitPolicy.STRETCH) -> DprMapping:
    return DprMapping(back_cam, display, plane, fit)


def perceived_plane_point(display_px, true_eye: EyeState, display: DisplayModel,
                          plane: ScenePlane) -> np.ndarray | None:
    """Plane point (2D, mm) a user at true_eye perceives behind a display
    pixel, i.e. where the true-eye ray through the pixel's physical location
    meets the plane. None when the ray misses the plane forward."""
    eye_world = display.pose_world.apply(true_eye.cyclopean_mm)
    hit = intersect_ray_plane(_eye_ray_through_panel(eye_world, display, display_px), plane)
    if hit is None:
        return None
    return plane.to_plane_2d(hit)


def _display_px_for_target_from_eye(eye_mm: np.ndarray, target_world,
                                    display: DisplayModel) -> np.ndarray:
    """Pixel where an eye-based mode draws a world target: the intersection
    of the eye-to-target segment with the panel surface (z = 0)."""
    target_disp = display.pose_world.invert().apply(np.asarray(target_world, dtype=float))
    dz = target_disp[2] - eye_mm[2]
    if abs(dz) < 1e-12 or eye_mm[2] <= 0:
        raise DegenerateViewError("eye-to-target line does not cross the panel")
    t = eye_mm[2] / (eye_mm[2] - target_disp[2])
    if t <= 0:
        raise DegenerateViewError("target is on the eye's side of the panel")
    hit = eye_mm + t * (target_disp - eye_mm)
    return display.mm_to_px(hit)


def render_target_px(mode: RenderMode, target_world, estimated_eye: EyeState | None,
                     display: DisplayModel, back_cam: PinholeCamera | None = None,
                     fit: FitPolicy = FitPolicy.STRETCH) -> np.ndarray:
    """Display pixel where the given mode draws a world-frame target.

    UPR/AAUPR use the supplied eye estimate, FUPR the fixed calibration eye
    (passed in as estimated_eye by the caller), DPR the back camera.
    """
    if mode is RenderMode.DPR:
        if back_cam is None:
            raise ValueError("DPR requires a back camera")
        target_disp = display.pose_world.invert().apply(np.asarray(target_world, dtype=float))
        target_cam = back_cam.extrinsic.apply(target_disp)
        cam_px = project_pinhole(back_cam, target_cam)
        return cam_px_to_display_px(cam_px, display, back_cam, fit)
    if estimated_eye is None:
        raise ValueError(f"{mode.value} requires an eye estimate")
    return _display_px_for_target_from_eye(estimated_eye.cyclopean_mm, target_world, display)


def pointing_error(mode: RenderMode, target_world, estimated_eye: EyeState | None,
                   true_eye: EyeState, display: DisplayModel, plane: ScenePlane,
                   back_cam: PinholeCamera | None = None,
                   fit: FitPolicy = FitPolicy.STRETCH) -> float:
    """On-plane distance (mm) between a target and where the user perceives
    the drawn target, looking from the true eye. Raises GeometryError when
    any involved ray fails to resolve."""
    p_display = render_target_px(mode, target_world, estimated_eye, display, back_cam, fit)
    perceived = perceived_plane_point(p_display, true_eye, display, plane)
    if perceived is None:
        raise GeometryError("perceived ray misses the scene plane")
    target_2d = plane.to_plane_2d(np.asarray(target_world, dtype=float))
    return float(np.linalg.norm(perceived - target_2d))


def error_mm_to_px(error_mm: float, px_per_mm: float) -> float:
    """Optional on-plane px conversion for a configured pixel density."""
    return error_mm * px_per_mm
