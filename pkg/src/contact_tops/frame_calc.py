"""Structure functions, Levi-Civita connection and curvature in an orthonormal frame.

Conventions, all in frame components with 0-based array axes:

* ``c[i, j, k]``: ``[X_i, X_j] = sum_k c[i, j, k] X_k``
* ``gamma[i, j, k] = g(nabla_{X_i} X_j, X_k) = (c_ij^k + c_ki^j + c_kj^i) / 2``
* ``R[i, j, k, s] = g(R(X_i, X_j) X_k, X_s)`` with
  ``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]``
* sectional curvature of span(X, Y) for orthonormal X, Y is ``-g(R(X,Y)X, Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import DEFAULT_FD, FDConfig
from .models import FrameModel, bracket_table_fd

CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True)
class StructureField:
    """Structure functions at a batch of points, shape (..., 3, 3, 3).

    Only the ``i < j`` entries are taken from the input; the rest is filled
    in by antisymmetry.
    """

    c: np.ndarray
    constant: bool = False

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        upper = np.zeros_like(c)
        for i, j in ((0, 1), (0, 2), (1, 2)):
            upper[..., i, j, :] = c[..., i, j, :]
            upper[..., j, i, :] = -c[..., i, j, :]
        object.__setattr__(self, "c", upper)

    def __getitem__(self, ijk):
        """1-based access ``sf[1, 2, 3]`` -> ``c_12^3``."""
        i, j, k = ijk
        return self.c[..., i - 1, j - 1, k - 1]


@dataclass(frozen=True)
class ConnectionCoeffs:
    gamma: np.ndarray

    def __getitem__(self, ijk):
        i, j, k = ijk
        return self.gamma[..., i - 1, j - 1, k - 1]


@dataclass(frozen=True)
class FieldPropertyReport:
    killing_residual: float
    geodesic_residual: float
    tol: float
    n_points: int
    seed: int | None

    @property
    def is_killing(self) -> bool:
        return self.killing_residual < self.tol

    @property
    def is_geodesic(self) -> bool:
        return self.geodesic_residual < self.tol

    @property
    def passed(self) -> bool:
        return self.is_killing and self.is_geodesic


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    theta: float
    phi: float
    value: float


# --- structure and connection -----------------------------------------------

def structure_functions(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD) -> StructureField:
    """Analytic table when the model has one, numeric brackets otherwise."""
    x = np.asarray(x, dtype=float)
    if m.analytic_structure is not None:
        c = np.broadcast_to(m.analytic_structure, x.shape[:-1] + (3, 3, 3))
        return StructureField(c, constant=True)
    return StructureField(bracket_table_fd(m, x, cfg))


def christoffel_array(c: np.ndarray) -> np.ndarray:
    # gamma[i,j,k] = (c[i,j,k] + c[k,i,j] + c[k,j,i]) / 2
    return 0.5 * (c + np.einsum("...kij->...ijk", c) + np.einsum("...kji->...ijk", c))


def christoffel(sf: StructureField) -> ConnectionCoeffs:
    return ConnectionCoeffs(christoffel_array(sf.c))


def frame_derivative(m: FrameModel, fn, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """``X_i(fn)`` for i = 1..3 as an array of shape (..., 3, *fn_shape).

    Fourth-order central stencil along the straight line ``x + t X_i(x)``
    (projected on the sphere) with step ``cfg.nested_h``.
    """
    x = m.domain.project(np.asarray(x, dtype=float))
    frame = m.frame(x)  # (..., 3, n)
    H = cfg.nested_h
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * H
    pts = x[None, ..., None, :] + offsets.reshape((4,) + (1,) * (x.ndim + 1)) * frame[None]
    vals = np.asarray(fn(m.domain.project(pts)))
    return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * H)


def structure_derivatives(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """``dc[..., i, j, k, l] = X_i(c_jk^l)``; exactly zero for analytic tables."""
    x = np.asarray(x, dtype=float)
    if m.analytic_structure is not None:
        return np.zeros(x.shape[:-1] + (3, 3, 3, 3))
    return frame_derivative(m, lambda y: structure_functions(m, y, cfg).c, x, cfg)


def covariant_derivative(m: FrameModel, x, a, j: int, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Frame components of ``nabla_a X_j`` (``j`` is 1-based)."""
    a = np.asarray(a, dtype=float)
    if np.any(np.linalg.norm(a, axis=-1) == 0):
        raise ValueError("direction must be non-zero")
    gamma = christoffel(structure_functions(m, x, cfg)).gamma
    return np.einsum("...i,...ik->...k", a, gamma[..., :, j - 1, :])


# --- curvature -------------------------------------------------------------

def curvature_tensor(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """``R[..., i, j, k, s] = g(R(X_i, X_j) X_k, X_s)``."""
    x = np.asarray(x, dtype=float)
    c = structure_functions(m, x, cfg).c
    g = christoffel_array(c)
    dg = christoffel_array(structure_derivatives(m, x, cfg))  # dg[..., i, j, k, s] = X_i(gamma_jk^s)
    quad = np.einsum("...jkl,...ils->...ijks", g, g) - np.einsum("...ikl,...jls->...ijks", g, g)
    deriv = dg - np.swapaxes(dg, -4, -3)
    bracket = np.einsum("...ijl,...lks->...ijks", c, g)
    return quad + deriv - bracket


def curvature_component(m: FrameModel, x, idx, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    i, j, k, s = (v - 1 for v in idx)
    return curvature_tensor(m, x, cfg)[..., i, j, k, s]


def plane_vectors(theta, phi):
    """Orthonormal pair spanning the plane at angle ``phi`` from X3 (phi=0 contains X3)."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    zero = np.zeros_like(theta)
    X = np.stack([np.cos(theta), np.sin(theta), zero], axis=-1)
    Y = np.stack([-np.sin(phi) * np.sin(theta), np.sin(phi) * np.cos(theta), np.cos(phi)], axis=-1)
    return X, Y


def sectional_from_tensor(R: np.ndarray, theta, phi) -> np.ndarray:
    """Sectional curvature for every point of ``R`` (shape (P, 3,3,3,3)) and
    every (theta, phi) of the broadcast grid; result shape (P, *grid)."""
    X, Y = plane_vectors(theta, phi)
    return -np.einsum("pijks,...i,...j,...k,...s->p...", R, X, Y, X, Y)


def sectional_curvature(m: FrameModel, x, theta, phi, cfg: FDConfig = DEFAULT_FD):
    x = np.asarray(x, dtype=float)
    R = curvature_tensor(m, x.reshape(-1, x.shape[-1]), cfg)
    K = sectional_from_tensor(R, theta, phi)
    return K.reshape(x.shape[:-1] + K.shape[1:])


# --- field properties ------------------------------------------------------

def _field_components(field, x):
    if callable(field):
        z = np.asarray(field(x), dtype=float)
    else:
        z = np.broadcast_to(np.asarray(field, dtype=float), x.shape[:-1] + (3,))
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("field vanishes at a sample point")
    return z / norm


def field_properties(m: FrameModel, field, tol: float = 1e-8, samples=None,
                     cfg: FDConfig = DEFAULT_FD, seed: int = 42, n: int = 50) -> FieldPropertyReport:
    """Killing and geodesic residuals of a unit field given in frame components.

    ``field`` is a constant component vector or a batched callable.  The
    Killing residual is the largest ``|g(nabla_Xi Z, Xk) + g(Xi, nabla_Xk Z)|``
    over sample points and frame pairs; the geodesic residual is the largest
    ``|nabla_Z Z|``.
    """
    x = m.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    z = _field_components(field, x)
    gamma = christoffel(structure_functions(m, x, cfg)).gamma
    A = np.einsum("...j,...ijk->...ik", z, gamma)
    if callable(field):
        A = A + frame_derivative(m, lambda y: _field_components(field, y), x, cfg)
    killing = np.abs(A + np.swapaxes(A, -1, -2)).max()
    geodesic = np.linalg.norm(np.einsum("...i,...ik->...k", z, A), axis=-1).max()
    return FieldPropertyReport(float(killing), float(geodesic), tol, len(x),
                               seed if samples is None else None)


def jacobi_residual(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD) -> float:
    """Largest component of ``sum_cyc [X_i, [X_j, X_k]]`` over the points ``x``."""
    x = np.asarray(x, dtype=float)
    c = structure_functions(m, x, cfg).c
    dc = structure_derivatives(m, x, cfg)
    total = 0.0
    for i, j, k in CYCLIC:
        total = total + dc[..., i, j, k, :] + np.einsum("...l,...lm->...m", c[..., j, k, :], c[..., i, :, :])
    return float(np.abs(total).max())
