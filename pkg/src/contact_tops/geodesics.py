"""Geodesics in (position, frame-component) form and rotation-speed measurements.

A unit-speed geodesic is written ``gamma' = sum_i a_i X_i``; the geodesic
equation becomes the first-order system

    x' = sum_i a_i X_i(x),      a_k' = -sum_ij a_i a_j gamma_ij^k(x),

integrated with classical fixed-step RK4.  Everything here is batched: a
state may hold many geodesics at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .expr import DEFAULT_FD, FDConfig
from .frame_calc import christoffel_array, structure_functions
from .models import FrameModel, _basis_matrix

VELOCITY = "velocity"
HARD_DRIFT = 1e-6


class IntegrationError(RuntimeError):
    pass


class DegenerateMeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class GeodesicState:
    x: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        a = np.asarray(self.a, dtype=float)
        norm = np.linalg.norm(a, axis=-1)
        if np.any(np.abs(norm - 1) > 1e-9):
            raise ValueError("velocity components must have unit length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class Trajectory:
    """Time series of a batch of geodesics; arrays are (steps + 1, ...)."""

    t: np.ndarray
    x: np.ndarray
    a: np.ndarray
    rot13: np.ndarray
    rot3v: np.ndarray
    speed_drift: np.ndarray = field(repr=False)
    constraint_drift: np.ndarray = field(repr=False)

    @property
    def max_speed_drift(self) -> float:
        return float(self.speed_drift.max(initial=0.0))

    @property
    def max_constraint_drift(self) -> float:
        return float(self.constraint_drift.max(initial=0.0))


@dataclass(frozen=True)
class TopConditionReport:
    deviations: dict
    tol: float
    n_geodesics: int
    n_transverse: int
    n_pairs: int
    duration: float
    step: float
    seed: int

    def passed(self, cond: str) -> bool:
        return self.deviations[cond] < self.tol

    @property
    def all_passed(self) -> bool:
        return all(self.passed(c) for c in self.deviations)

    def to_dict(self) -> dict:
        return {
            "conditions": {c: {"max_deviation": d, "passed": self.passed(c)}
                           for c, d in self.deviations.items()},
            "is_top": self.all_passed,
            "tol": self.tol, "n_geodesics": self.n_geodesics,
            "n_transverse": self.n_transverse, "n_pairs": self.n_pairs,
            "duration": self.duration, "step": self.step, "seed": self.seed,
        }


def _gamma_fn(m: FrameModel, cfg: FDConfig):
    if m.analytic_structure is not None:
        g0 = christoffel_array(np.asarray(m.analytic_structure, dtype=float))
        return lambda x: np.broadcast_to(g0, x.shape[:-1] + (3, 3, 3))
    return lambda x: christoffel_array(structure_functions(m, x, cfg).c)


def _cross(m: FrameModel, z, y):
    return m.orientation * np.cross(z, y)


def _rotation_speeds(m: FrameModel, a: np.ndarray, gamma: np.ndarray):
    """R(X1, X3) and R(X3, gamma') for velocity components ``a``."""
    rot13 = np.einsum("...i,...i->...", a, gamma[..., :, 0, 1]) * m.orientation
    nabla3 = np.einsum("...i,...ik->...k", a, gamma[..., :, 2, :])
    e3 = np.zeros(a.shape)
    e3[..., 2] = 1.0
    rot3v = np.einsum("...k,...k->...", nabla3, _cross(m, a, e3))
    return rot13, rot3v


def integrate_geodesics(m: FrameModel, x0, a0, T: float = 10.0, h: float = 1e-3,
                        cfg: FDConfig = DEFAULT_FD) -> Trajectory:
    """RK4 integration of a batch of geodesics; ``x0`` (..., n), ``a0`` (..., 3)."""
    if not h > 0 or T < h:
        raise ValueError("need h > 0 and T >= h")
    steps = int(round(T / h))
    x = m.domain.project(np.array(x0, dtype=float))
    a = np.array(a0, dtype=float)
    if np.any(np.abs(np.linalg.norm(a, axis=-1) - 1) > 1e-9):
        raise ValueError("velocity components must have unit length")
    gamma_at = _gamma_fn(m, cfg)
    proj = m.domain.project

    def rhs(x, a, frame=None, gamma=None):
        xp = proj(x)
        frame = m.frame(xp) if frame is None else frame
        gamma = gamma_at(xp) if gamma is None else gamma
        dx = np.einsum("...i,...ia->...a", a, frame)
        da = -np.einsum("...i,...j,...ijk->...k", a, a, gamma)
        return dx, da

    xs = np.empty((steps + 1,) + x.shape)
    as_ = np.empty((steps + 1,) + a.shape)
    r13 = np.empty((steps + 1,) + a.shape[:-1])
    r3v = np.empty_like(r13)
    speed = np.empty((steps,) + a.shape[:-1])
    constraint = np.zeros_like(speed)
    for n in range(steps + 1):
        frame = m.frame(x)
        if np.any(np.abs(np.linalg.det(_basis_matrix(m, x, frame))) < 1e-10):
            raise IntegrationError(f"frame degenerates along the geodesic at step {n}")
        gamma = gamma_at(x)
        xs[n], as_[n] = x, a
        r13[n], r3v[n] = _rotation_speeds(m, a, gamma)
        if n == steps:
            break
        k1 = rhs(x, a, frame, gamma)
        k2 = rhs(x + 0.5 * h * k1[0], a + 0.5 * h * k1[1])
        k3 = rhs(x + 0.5 * h * k2[0], a + 0.5 * h * k2[1])
        k4 = rhs(x + h * k3[0], a + h * k3[1])
        x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        a = a + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        norm = np.linalg.norm(a, axis=-1)
        speed[n] = np.abs(norm - 1)
        a = a / norm[..., None]
        if m.kind == "embedded4":
            constraint[n] = np.abs(np.linalg.norm(x, axis=-1) - 1)
            x = proj(x)
        if speed[n].max() > HARD_DRIFT or constraint[n].max() > HARD_DRIFT:
            raise IntegrationError(f"drift above {HARD_DRIFT} at step {n}; reduce the step")
    t = np.arange(steps + 1) * h
    return Trajectory(t, xs, as_, r13, r3v, speed, constraint)


def integrate_geodesic(m: FrameModel, s0: GeodesicState, T: float = 10.0, h: float = 1e-3,
                       cfg: FDConfig = DEFAULT_FD) -> Trajectory:
    return integrate_geodesics(m, s0.x, s0.a, T, h, cfg)


def _components(spec, a):
    if isinstance(spec, str):
        if spec != VELOCITY:
            raise ValueError(f"unknown field spec {spec!r}")
        return a
    if isinstance(spec, (int, np.integer)):
        if not 1 <= spec <= 3:
            raise ValueError("frame indices are 1, 2 or 3")
        e = np.zeros(a.shape)
        e[..., spec - 1] = 1.0
        return e
    y = np.broadcast_to(np.asarray(spec, dtype=float), a.shape)
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def rotation_speed(m: FrameModel, s: GeodesicState, Y, Z, cfg: FDConfig = DEFAULT_FD):
    """``g(nabla_v Y, Z x Y)`` along the velocity ``v`` of ``s``.

    ``Y`` and ``Z`` are 1-based frame indices, constant frame-component
    vectors, or ``"velocity"`` (allowed for ``Z``).  The cross product is
    taken in the frame with the model's orientation.
    """
    if isinstance(Y, str):
        raise ValueError("Y must be a frame field")
    x = m.domain.project(s.x)
    gamma = _gamma_fn(m, cfg)(x)
    y = _components(Y, s.a)
    z = _components(Z, s.a)
    cross = _cross(m, z, y)
    if np.any(np.linalg.norm(cross, axis=-1) < 1e-12):
        raise DegenerateMeasurementError("Y is parallel to Z")
    nabla = np.einsum("...i,...j,...ijk->...k", s.a, y, gamma)
    return np.einsum("...k,...k->...", nabla, cross)


# --- Definition-style top verification -------------------------------------

def sample_velocities(n: int, seed: int = 42, n_pairs: int = 5) -> np.ndarray:
    """Unit vectors from a scrambled Halton sequence, with ``n_pairs`` twins
    appended that repeat an earlier ``a3`` at a shifted azimuth."""
    base = n - n_pairs
    if n_pairs < 0 or base < n_pairs:
        raise ValueError("need 0 <= n_pairs <= n / 2")
    u = qmc.Halton(2, scramble=True, seed=seed).random(base)
    a3 = 1 - 2 * u[:, 0]
    az = 2 * np.pi * u[:, 1]
    a3 = np.concatenate([a3, a3[:n_pairs]])
    az = np.concatenate([az, az[:n_pairs] + 2.0])
    r = np.sqrt(1 - a3 ** 2)
    return np.stack([r * np.cos(az), r * np.sin(az), a3], axis=-1)


def verify_top_conditions(m: FrameModel, n_geodesics: int = 20, T: float = 10.0, h: float = 1e-3,
                          tol: float = 1e-5, seed: int = 42, cfg: FDConfig = DEFAULT_FD,
                          transverse_cutoff: float = 0.01) -> TopConditionReport:
    """Integrate sampled geodesics and measure the four top conditions.

    (i)   drift of ``a3`` along each geodesic
    (ii)  drift of R(X3, gamma') along geodesics with a1^2 + a2^2 > cutoff
    (iii) drift of R(X1, X3) along each geodesic
    (iv)  spread of R(X1, X3) among geodesics sharing the same ``a3``
    """
    if n_geodesics < 10:
        raise ValueError("need at least 10 geodesics")
    n_pairs = 5
    a0 = sample_velocities(n_geodesics, seed, n_pairs)
    x0 = m.domain.sample(n_geodesics, seed + 1)
    traj = integrate_geodesics(m, x0, a0, T, h, cfg)
    dev_i = np.abs(traj.a[..., 2] - traj.a[0, :, 2]).max()
    transverse = (a0[:, 0] ** 2 + a0[:, 1] ** 2) > transverse_cutoff
    dev_ii = np.abs(traj.rot3v[:, transverse] - traj.rot3v[0, transverse]).max(initial=0.0)
    dev_iii = np.abs(traj.rot13 - traj.rot13[0]).max()
    keys = np.round(a0[:, 2] / 1e-9)
    dev_iv = 0.0
    for key in np.unique(keys):
        group = traj.rot13[0, keys == key]
        if len(group) > 1:
            dev_iv = max(dev_iv, float(group.max() - group.min()))
    devs = {"i": float(dev_i), "ii": float(dev_ii), "iii": float(dev_iii), "iv": dev_iv}
    return TopConditionReport(devs, tol, n_geodesics, int(transverse.sum()), n_pairs, T, h, seed)
