"""Geometric primitives on SO(3) and the sphere.

Rotation matrices are plain (3, 3) float64 numpy arrays mapping body-frame
vectors to world-frame vectors. Angles are radians; angular velocities are
body-frame rad/s. A body riding on a sphere of radius ``rho`` has its
position tied to its attitude through ``p = rho * R @ e3``, so every
position-level quantity here is derived from rotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])

_SKEW_TOL = 1e-9
_UNIT_AXIS_TOL = 1e-9
_GIMBAL_MARGIN = 1e-6


class GimbalLockError(ValueError):
    """Attitude too close to the Euler-chart singularity (|cos psi| < 1e-6)."""


@dataclass(frozen=True)
class EulerXYZ:
    """Roll-pitch-yaw angles (phi, psi, eta) with R = Rx(phi) Ry(psi) Rz(eta)."""

    phi: float
    psi: float
    eta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.psi, self.eta])


def hat(a) -> np.ndarray:
    """Skew matrix of a 3-vector: hat(a) @ b == cross(a, b)."""
    x, y, z = float(a[0]), float(a[1]), float(a[2])
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    """Inverse of hat. Rejects matrices that are not skew-symmetric.

    Args:
        S: (3, 3) skew-symmetric matrix, ||S + S^T||_F <= 1e-9.

    Returns:
        (3,) vector v with hat(v) == S.
    """
    S = np.asarray(S, dtype=float)
    if np.linalg.norm(S + S.T) > _SKEW_TOL:
        raise ValueError("vee: input is not skew-symmetric")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def exp_so3(axis, angle: float) -> np.ndarray:
    """Rotation about a unit axis via the Rodrigues formula.

    The closed form I + sin(t) K + (1 - cos(t)) K^2 is exact for every
    angle including 0, so no small-angle branch is needed.

    Args:
        axis: (3,) unit vector (norm within 1e-9 of 1).
        angle: rotation angle, rad.

    Returns:
        (3, 3) rotation matrix.
    """
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if abs(n - 1.0) > _UNIT_AXIS_TOL:
        raise ValueError(f"exp_so3: axis norm {n} is not within 1e-9 of 1")
    K = hat(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def sk_vee(R) -> np.ndarray:
    """vee of the skew part of R: vee((R - R^T) / 2) = axis * sin(angle)."""
    R = np.asarray(R, dtype=float)
    return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def geodesic_distance(R_rel, rho: float) -> float:
    """Arc length between two sphere positions from their relative attitude.

    d = rho * arccos(e3^T R_rel e3). The arccos argument is clamped to
    [-1, 1]; floating-point drift can push it marginally outside even
    though it is mathematically confined to that interval.

    Args:
        R_rel: (3, 3) relative rotation R_i^T R_j.
        rho: sphere radius, > 0.

    Returns:
        Geodesic distance in [0, rho * pi].
    """
    if rho <= 0.0:
        raise ValueError("geodesic_distance: rho must be positive")
    c = min(1.0, max(-1.0, float(np.asarray(R_rel)[2, 2])))
    return rho * math.acos(c)


def embed_position(R, rho: float) -> np.ndarray:
    """Position on the sphere determined by an attitude: p = rho * R @ e3."""
    if rho <= 0.0:
        raise ValueError("embed_position: rho must be positive")
    R = np.asarray(R, dtype=float)
    return rho * R[:, 2].copy()


def body_velocity(omega, rho: float) -> np.ndarray:
    """Translational body velocity induced by an angular velocity.

    v = -rho * hat(e3) @ omega = [rho * w_y, -rho * w_x, 0]: tilting about
    the body x/y axes translates the contact point, spinning about the
    radial z axis does not.
    """
    if rho <= 0.0:
        raise ValueError("body_velocity: rho must be positive")
    return np.array([rho * float(omega[1]), -rho * float(omega[0]), 0.0])


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(z: EulerXYZ) -> np.ndarray:
    """Compose R = Rx(phi) @ Ry(psi) @ Rz(eta)."""
    return rot_x(z.phi) @ rot_y(z.psi) @ rot_z(z.eta)


def rotation_to_euler(R) -> EulerXYZ:
    """Extract XYZ Euler angles with psi confined to (-pi/2, pi/2).

    Args:
        R: (3, 3) rotation matrix.

    Returns:
        EulerXYZ such that euler_to_rotation round-trips R.

    Raises:
        GimbalLockError: if |cos psi| < 1e-6 (chart boundary).
    """
    R = np.asarray(R, dtype=float)
    cos_psi = math.hypot(R[0, 0], R[0, 1])
    if cos_psi < _GIMBAL_MARGIN:
        raise GimbalLockError("rotation_to_euler: |cos psi| below 1e-6 margin")
    psi = math.atan2(R[0, 2], cos_psi)
    phi = math.atan2(-R[1, 2], R[2, 2])
    eta = math.atan2(-R[0, 1], R[0, 0])
    return EulerXYZ(phi=phi, psi=psi, eta=eta)


def euler_rate_matrix(z: EulerXYZ) -> np.ndarray:
    """Map body angular velocity to Euler-angle rates: zdot = g(z) @ omega.

    Raises:
        GimbalLockError: if |cos psi| < 1e-6.
    """
    c_psi = math.cos(z.psi)
    if abs(c_psi) < _GIMBAL_MARGIN:
        raise GimbalLockError("euler_rate_matrix: |cos psi| below 1e-6 margin")
    s_eta, c_eta = math.sin(z.eta), math.cos(z.eta)
    t_psi = math.tan(z.psi)
    return np.array([
        [c_eta / c_psi, -s_eta / c_psi, 0.0],
        [s_eta, c_eta, 0.0],
        [-c_eta * t_psi, s_eta * t_psi, 1.0],
    ])


def check_rotation(R, tol: float = 1e-9) -> np.ndarray:
    """Validate orthonormality and det = +1; returns R as a float array."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"expected a (3, 3) matrix, got shape {R.shape}")
    if np.linalg.norm(R.T @ R - np.eye(3)) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return R
