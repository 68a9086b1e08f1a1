"""3D vector geometry for link-duration analysis.

Positions and velocities are plain ``numpy`` arrays of shape ``(3,)``.
A communication link between two nodes exists while their relative
displacement stays inside the sphere of radius ``R`` centred on the
observer; in the relative frame the neighbor traverses a chord of that
sphere, which is what every duration formula here is built on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = np.ndarray

#: Relative speeds below this (m/s) are treated as co-moving.
CO_MOVING_SPEED = 1e-9


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def unit(v: Vec3) -> Vec3:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalise the zero vector")
    return v / n


def spherical_to_cartesian(magnitude: float, azimuth: float, polar: float) -> Vec3:
    """Vector from magnitude, azimuth (about +Z from +X) and polar angle (from +Z)."""
    sp = math.sin(polar)
    return np.array([
        magnitude * sp * math.cos(azimuth),
        magnitude * sp * math.sin(azimuth),
        magnitude * math.cos(polar),
    ])


@dataclass(frozen=True)
class RelativeMotion:
    """Relative velocity of a neighbor in the observer's frame.

    ``co_moving`` marks the degenerate case of identical velocities, where
    the direction angles are meaningless and the link never expires on its
    own.
    """

    v: float
    alpha_v: float
    beta_v: float
    co_moving: bool = False


def relative_motion(v_o: float, v_c: float, alpha_vo: float, beta_vo: float) -> RelativeMotion:
    """Relative speed and direction of an ordinary node against a +Z-moving observer.

    The observer travels at ``v_c`` along +Z; the other node travels at
    ``v_o`` with direction ``(alpha_vo, beta_vo)``.  Law of cosines gives the
    relative speed, and the polar angle follows from the Z component of the
    velocity difference.
    """
    if v_o < 0 or v_c < 0:
        raise ValueError("speeds must be non-negative")
    if not (math.isfinite(alpha_vo) and math.isfinite(beta_vo)):
        raise ValueError("angles must be finite")
    cos_b = math.cos(beta_vo)
    v_sq = v_o * v_o + v_c * v_c - 2.0 * v_c * v_o * cos_b
    v = math.sqrt(max(v_sq, 0.0))
    if v <= CO_MOVING_SPEED * max(1.0, v_o, v_c):
        return RelativeMotion(0.0, alpha_vo, 0.0, co_moving=True)
    beta_v = math.acos(min(1.0, max(-1.0, (v_o * cos_b - v_c) / v)))
    return RelativeMotion(v, alpha_vo, beta_v)


def relative_motion_from_vectors(vel_o: Vec3, vel_c: Vec3) -> RelativeMotion:
    """Relative motion from two explicit velocity vectors (direct subtraction)."""
    d = np.asarray(vel_o, dtype=float) - np.asarray(vel_c, dtype=float)
    v = float(np.linalg.norm(d))
    scale = max(1.0, float(np.linalg.norm(vel_o)), float(np.linalg.norm(vel_c)))
    if v <= CO_MOVING_SPEED * scale:
        return RelativeMotion(0.0, 0.0, 0.0, co_moving=True)
    return RelativeMotion(v, math.atan2(d[1], d[0]), math.acos(min(1.0, max(-1.0, d[2] / v))))


def whole_link_duration(R: float, rel: RelativeMotion, theta_a: float, psi_a: float) -> float:
    """Full chord-crossing time for a neighbor entering at angles (theta_a, psi_a).

    Returns ``math.inf`` for co-moving pairs.  The projection term is the
    cosine of the angle between the entrance radius and the relative
    velocity, so the result is bounded by the diametral time ``2R/v``.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if rel.co_moving or rel.v == 0.0:
        return math.inf
    proj = (math.sin(psi_a) * math.sin(rel.beta_v) * math.cos(theta_a - rel.alpha_v)
            + math.cos(psi_a) * math.cos(rel.beta_v))
    return (2.0 * R / rel.v) * abs(proj)


@dataclass(frozen=True)
class ChordGeometry:
    """Reconstructed crossing chord of a neighbor through the observer sphere.

    ``entrance`` is where the neighbor's relative position pierced the
    sphere (possibly virtual, if the pair was already in range when first
    observed); ``elapsed_distance`` is how far along the chord it has
    travelled so far.
    """

    entrance: Vec3
    theta_a: float
    psi_a: float
    whole_ld: float
    chord_length: float
    elapsed_distance: float = 0.0
    co_moving: bool = False


CO_MOVING_CHORD = ChordGeometry(
    entrance=np.zeros(3), theta_a=0.0, psi_a=0.0,
    whole_ld=math.inf, chord_length=math.inf, elapsed_distance=0.0, co_moving=True)


def entrance_point(center: Vec3, neighbor_pos: Vec3, rel_vel: Vec3, R: float) -> ChordGeometry:
    """Backward ray-sphere intersection recovering where a neighbor entered range.

    ``neighbor_pos`` must lie inside (or on) the sphere of radius ``R``
    about ``center``.  Walking backwards along ``rel_vel`` from the current
    relative position, the far intersection with the sphere is the entrance
    point; the chord through it fixes the whole link duration.
    """
    r = np.asarray(neighbor_pos, dtype=float) - np.asarray(center, dtype=float)
    dist = float(np.linalg.norm(r))
    if dist > R * (1.0 + 1e-9):
        raise ValueError(f"neighbor at distance {dist:.3f} is outside range {R:.3f}")
    speed = float(np.linalg.norm(rel_vel))
    if speed <= CO_MOVING_SPEED:
        return CO_MOVING_CHORD
    vhat = np.asarray(rel_vel, dtype=float) / speed
    along = float(np.dot(r, vhat))
    disc = along * along - dist * dist + R * R
    half_chord = math.sqrt(max(disc, 0.0))
    elapsed = along + half_chord
    entrance = np.asarray(center, dtype=float) + r - elapsed * vhat
    ent_rel = entrance - np.asarray(center, dtype=float)
    psi_a = math.acos(min(1.0, max(-1.0, ent_rel[2] / R)))
    theta_a = math.atan2(ent_rel[1], ent_rel[0])
    rel = RelativeMotion(speed, math.atan2(vhat[1], vhat[0]),
                         math.acos(min(1.0, max(-1.0, vhat[2]))))
    return ChordGeometry(
        entrance=entrance,
        theta_a=theta_a,
        psi_a=psi_a,
        whole_ld=whole_link_duration(R, rel, theta_a, psi_a),
        chord_length=2.0 * half_chord,
        elapsed_distance=max(elapsed, 0.0),
    )


def swept_volume(v: float, t: float, R: float) -> float:
    """Volume of the region whose occupants change the neighbor set within ``t``.

    Union of the entry shell (a backward-swept capsule minus the sphere)
    and the exit region (the sphere minus its shifted copy).  The two
    closed forms meet continuously at ``vt = 2R``.
    """
    if v < 0 or t < 0:
        raise ValueError("v and t must be non-negative")
    if R <= 0:
        raise ValueError("R must be positive")
    d = v * t
    if d > 2.0 * R:
        return math.pi * R * R * (4.0 * R + 3.0 * d) / 3.0
    return math.pi * d * (24.0 * R * R - d * d) / 12.0


def swept_volume_array(d: np.ndarray, R: float) -> np.ndarray:
    """Vectorised :func:`swept_volume` over displacement ``d = v*t``."""
    capsule = np.pi * R * R * (4.0 * R + 3.0 * d) / 3.0
    inner = np.pi * d * (24.0 * R * R - d * d) / 12.0
    return np.where(d > 2.0 * R, capsule, inner)
