"""Crystal-frame geometry for diamond defect-axis magnetometry.

All vector quantities live in the cubic <100> frame of the diamond: x, y, z
along the cube edges.  A field is described either as a Cartesian 3-vector
or in spherical form (b_m_mt, theta, phi), where theta is the latitude of the
vector with respect to the x-axis (+90 deg along +x, 0 deg in the yz-plane)
and phi is the longitude of its yz-plane projection, measured from +y
toward +z.  Angles are degrees in the public API; magnitudes are mT
throughout the package.

Any lab-to-crystal rotation is the caller's responsibility; the scan
pipeline accepts one in its configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SphericalField",
    "as_vec3",
    "as_rotation",
    "spherical_to_cartesian",
    "cartesian_to_spherical",
    "nv_axes",
    "project_field",
]


def as_vec3(v) -> np.ndarray:
    """Validate and return ``v`` as a float array of shape (3,) with finite entries."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    return arr


def as_rotation(m) -> np.ndarray:
    """Validate a proper rotation matrix (orthonormal, determinant +1)."""
    arr = np.asarray(m, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"expected a 3x3 rotation matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("rotation entries must be finite")
    if not np.allclose(arr @ arr.T, np.eye(3), atol=1e-9):
        raise ValueError("rotation must be orthonormal")
    if abs(np.linalg.det(arr) - 1.0) > 1e-9:
        raise ValueError("rotation must have determinant +1")
    return arr


@dataclass(frozen=True)
class SphericalField:
    """Field vector in spherical form: magnitude (mT), latitude and longitude (deg).

    ``degenerate`` marks a zero-magnitude field whose angles are conventional
    (0, 0) rather than meaningful, so map pipelines can carry it without
    aborting.
    """

    b_m_mt: float
    theta_deg: float
    phi_deg: float
    degenerate: bool = False

    def __post_init__(self):
        for name in ("b_m_mt", "theta_deg", "phi_deg"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.b_m_mt < 0:
            raise ValueError("field magnitude must be >= 0")
        if not -90.0 <= self.theta_deg <= 90.0:
            raise ValueError("theta must lie in [-90, +90] degrees")
        if not -180.0 < self.phi_deg <= 180.0:
            raise ValueError("phi must lie in (-180, +180] degrees")


def spherical_to_cartesian(field: SphericalField) -> np.ndarray:
    """Cartesian components (x, y, z) of ``field``, in the units of ``field.b_m_mt``."""
    theta = math.radians(field.theta_deg)
    phi = math.radians(field.phi_deg)
    return field.b_m_mt * np.array(
        [math.sin(theta), math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi)]
    )


def cartesian_to_spherical(v) -> SphericalField:
    """Spherical form of a Cartesian vector.

    The zero vector maps to magnitude 0 with angles (0, 0) and the
    ``degenerate`` flag set.  For nonzero input the round trip through
    :func:`spherical_to_cartesian` reproduces ``v`` to near machine
    precision.
    """
    v = as_vec3(v)
    b_m_mt = float(np.linalg.norm(v))
    if b_m_mt == 0.0:
        return SphericalField(0.0, 0.0, 0.0, degenerate=True)
    theta = math.degrees(math.asin(min(1.0, max(-1.0, v[0] / b_m_mt))))
    phi = math.degrees(math.atan2(v[2], v[1]))
    if phi <= -180.0:
        phi = 180.0
    return SphericalField(b_m_mt, theta, phi)


_NV_AXES = np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
) / math.sqrt(3.0)
_NV_AXES.setflags(write=False)


def nv_axes() -> np.ndarray:
    """The four <111> defect axes as rows of a (4, 3) array.

    Rows correspond to axes 1..4.  Each pair of distinct axes encloses the
    tetrahedral angle (dot product -1/3) and the four rows sum to zero.
    """
    return _NV_AXES.copy()


def project_field(axis, b) -> tuple[float, float]:
    """Decompose ``b`` relative to a unit ``axis``.

    Returns ``(b_parallel, b_perp)``: the signed component along the axis
    and the non-negative transverse magnitude.  They satisfy
    ``b_parallel**2 + b_perp**2 == |b|**2`` up to rounding.
    """
    axis = as_vec3(axis)
    b = as_vec3(b)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("axis must be a unit vector")
    b_parallel = float(b @ axis)
    b_perp = float(np.linalg.norm(b - b_parallel * axis))
    return b_parallel, b_perp
