"""Dual coframe, exterior derivatives, contact circles and Reeb fields.

Form values are reported in the frame: a 2-form as its values on pairs
``(X_i, X_j)`` and a 3-form as its value on ``(X_1, X_2, X_3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import DEFAULT_FD, FDConfig, jacobian_fd
from .frame_calc import StructureField, structure_functions
from .models import FrameModel, _basis_matrix, top_table, transform_frame


class NotContactError(ValueError):
    pass


# --- coframe ---------------------------------------------------------------

def coframe_coefficients(m: FrameModel, x) -> np.ndarray:
    """Chart (ambient) coefficients of the dual forms; row k is omega_k.

    On the sphere the forms are extended to R^4 by omega_k(normal) = 0.
    """
    x = np.asarray(x, dtype=float)
    inv = np.linalg.inv(_basis_matrix(m, x, m.frame(x)))
    return inv[..., :3, :]


def duality_residual(m: FrameModel, x) -> float:
    x = m.domain.project(np.asarray(x, dtype=float))
    pairing = np.einsum("...ka,...ja->...kj", coframe_coefficients(m, x), m.frame(x))
    return float(np.abs(pairing - np.eye(3)).max())


def d_coframe(sf: StructureField) -> np.ndarray:
    """``d[..., k, i, j] = d omega_k(X_i, X_j) = -c_ij^k``."""
    return -np.moveaxis(sf.c, -1, -3)


def d_coframe_fd(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Same table from the coordinate exterior derivative of the coframe
    coefficients, independent of the bracket computation."""
    x = m.domain.project(np.asarray(x, dtype=float))
    n = m.dim
    flat = lambda y: coframe_coefficients(m, y).reshape(y.shape[:-1] + (3 * n,))
    J = jacobian_fd(flat, x, cfg).reshape(x.shape[:-1] + (3, n, n))  # J[k, b, a] = d_a W_kb
    dw = np.swapaxes(J, -1, -2) - J  # dw[k, a, b] = d_a W_kb - d_b W_ka
    frame = m.frame(x)
    return np.einsum("...kab,...ia,...jb->...kij", dw, frame, frame)


# --- circles ---------------------------------------------------------------

@dataclass(frozen=True)
class FormCircle:
    """Circle ``cos(t) u + sin(t) w`` of forms with constant coframe coefficients."""

    u: tuple = (1.0, 0.0, 0.0)
    w: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        u, w = np.asarray(self.u, float), np.asarray(self.w, float)
        if u.shape != (3,) or w.shape != (3,) or np.linalg.norm(np.cross(u, w)) < 1e-12:
            raise ValueError("generators must be two independent coframe combinations")

    def coefficients(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)[..., None]
        return np.cos(theta) * np.asarray(self.u, float) + np.sin(theta) * np.asarray(self.w, float)


DEFAULT_CIRCLE = FormCircle()


def theta_grid(n: int = 16) -> np.ndarray:
    return np.linspace(0.0, 2 * np.pi, n, endpoint=False)


def _axial(coeffs: np.ndarray, dtable: np.ndarray) -> np.ndarray:
    """Axial vector (eta_23, eta_31, eta_12) of eta = d(sum_k w_k omega_k)."""
    eta = np.einsum("...k,...kij->...ij", coeffs, dtable)
    return np.stack([eta[..., 1, 2], eta[..., 2, 0], eta[..., 0, 1]], axis=-1)


def _dtable(m: FrameModel, x, cfg):
    return d_coframe(structure_functions(m, np.asarray(x, dtype=float), cfg))


def contact_value(m: FrameModel, x, theta, circle: FormCircle = DEFAULT_CIRCLE,
                  cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """``(w ^ dw)(X1, X2, X3)`` for ``w = circle(theta)``.

    ``x`` has shape (P, n) and ``theta`` shape (T,); the result is (P, T).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    d = _dtable(m, x, cfg)[:, None]
    w = np.broadcast_to(circle.coefficients(theta)[None], (len(x), len(theta), 3))
    return np.einsum("ptk,ptk->pt", w, _axial(w, d))


def reeb_field(m: FrameModel, x, theta, circle: FormCircle = DEFAULT_CIRCLE,
               cfg: FDConfig = DEFAULT_FD, tol: float = 1e-10) -> np.ndarray:
    """Frame components of the Reeb field of ``circle(theta)`` at ``x``.

    ``dw(R, .) = 0`` forces R onto the axial vector v of dw, and
    ``w(R) = 1`` fixes the scale, so ``R = v / w(v)``; ``w(v)`` is the
    contact value and the system is singular exactly where it vanishes.
    """
    x = np.asarray(x, dtype=float)
    w = circle.coefficients(theta)
    w = np.broadcast_to(w, x.shape[:-1] + (3,)) if w.ndim == 1 else w
    v = _axial(w, _dtable(m, x, cfg))
    wv = np.einsum("...k,...k->...", w, v)
    if np.any(np.abs(wv) < tol):
        raise NotContactError("Reeb system is singular: the form is not contact here")
    return v / wv[..., None]


def roundness_residual(m: FrameModel, points, circle: FormCircle = DEFAULT_CIRCLE,
                       n_theta: int = 16, cfg: FDConfig = DEFAULT_FD) -> float:
    """Largest ``|R(t) - cos(t) R(0) - sin(t) R(pi/2)|`` over points and the theta grid."""
    x = np.asarray(points, dtype=float)
    r0 = reeb_field(m, x, 0.0, circle, cfg)
    r1 = reeb_field(m, x, np.pi / 2, circle, cfg)
    worst = 0.0
    for t in theta_grid(n_theta):
        rt = reeb_field(m, x, t, circle, cfg)
        worst = max(worst, float(np.linalg.norm(rt - np.cos(t) * r0 - np.sin(t) * r1, axis=-1).max()))
    return worst


@dataclass(frozen=True)
class CircleReport:
    contact_values: np.ndarray = field(repr=False)
    spread: float
    roundness: float | None
    classification: str
    taut: bool
    round: bool
    tol: float
    seed: int
    witness: dict | None = None

    def to_dict(self) -> dict:
        cv = self.contact_values
        out = {
            "classification": self.classification,
            "contact_value": float(np.mean(cv)),
            "contact_value_min": float(cv.min()),
            "contact_value_max": float(cv.max()),
            "tautness_spread": self.spread,
            "taut": self.taut,
            "roundness_residual": self.roundness,
            "round": self.round,
            "tol": self.tol,
            "seed": self.seed,
            "n_points": int(cv.shape[0]),
            "n_theta": int(cv.shape[1]),
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def circle_report(m: FrameModel, circle: FormCircle = DEFAULT_CIRCLE, n_theta: int = 16,
                  samples=None, tol: float = 1e-7, seed: int = 42, n_points: int = 50,
                  cfg: FDConfig = DEFAULT_FD) -> CircleReport:
    if n_theta < 8:
        raise ValueError("theta grid needs at least 8 points")
    x = m.domain.sample(n_points, seed) if samples is None else np.asarray(samples, dtype=float)
    thetas = theta_grid(n_theta)
    cv = contact_value(m, x, thetas, circle, cfg)
    spread = float(cv.max() - cv.min())
    absval = np.abs(cv)
    witness = None
    roundness = None
    if absval.min() > tol:
        kind = "contact circle" if np.all(np.sign(cv) == np.sign(cv.flat[0])) else "mixed/invalid"
        if kind == "contact circle":
            roundness = roundness_residual(m, x, circle, n_theta, cfg)
    elif absval.max() < tol:
        kind = "integrable pencil"
    else:
        kind = "mixed/invalid"
    if kind == "mixed/invalid":
        p, t = np.unravel_index(np.argmin(absval), absval.shape)
        witness = {"point": x[p].tolist(), "theta": float(thetas[t]), "contact_value": float(cv[p, t])}
    taut = kind == "contact circle" and spread < tol
    is_round = roundness is not None and roundness < tol
    return CircleReport(cv, spread, roundness, kind, taut, is_round, tol, seed, witness)


# --- K-Cartan normalization -------------------------------------------------

@dataclass(frozen=True)
class KCartan:
    K: int
    lam: float
    nu: float
    residual: float

    @property
    def scaling(self) -> np.ndarray:
        """Coframe scaling: new forms are ``(lam*w1, lam*w2, nu*w3)``."""
        return np.array([self.lam, self.lam, self.nu])


def k_cartan_target(K: float) -> np.ndarray:
    """d-table of dw1 = w2^w3, dw2 = w3^w1, dw3 = K w1^w2."""
    E = np.zeros((3, 3, 3))
    for k, (i, j), v in ((0, (1, 2), 1.0), (1, (2, 0), 1.0), (2, (0, 1), float(K))):
        E[k, i, j], E[k, j, i] = v, -v
    return E


def rescaled_table(c: np.ndarray, scaling) -> np.ndarray:
    """Structure constants of the frame ``X_i / s_i`` dual to ``s_i w_i``."""
    s = np.asarray(scaling, dtype=float)
    return c * s[None, None, :] / (s[:, None, None] * s[None, :, None])


def k_cartan_normalize(c: float, k: float, tol: float = 1e-12) -> KCartan:
    """Scalings bringing the top coframe to K-Cartan form, K = sign(ck).

    With ``d w1 = -k w2^w3`` etc., ``nu = -k`` fixes the first two identities
    and ``lam = sqrt(|ck|)`` (1 when c = 0) the third.
    """
    if abs(k) <= tol:
        raise NotContactError("k = 0: the pencil is integrable, not a contact circle")
    K = int(np.sign(c * k)) if abs(c) > tol else 0
    lam = float(np.sqrt(abs(c * k))) if K != 0 else 1.0
    nu = -float(k)
    table = rescaled_table(top_table(c, k), [lam, lam, nu])
    residual = float(np.abs(d_coframe(StructureField(table)) - k_cartan_target(K)).max())
    return KCartan(K, lam, nu, residual)


def k_cartan_residual(m: FrameModel, kc: KCartan, samples=None, seed: int = 42, n: int = 50,
                      cfg: FDConfig = DEFAULT_FD) -> float:
    """Check the identities on the model itself, with brackets measured on the
    rescaled frame ``(X1/lam, X2/lam, X3/nu)``."""
    x = m.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    scaled = transform_frame(m, np.diag(1.0 / kc.scaling), name=f"{m.name}~K-Cartan")
    d = d_coframe(structure_functions(scaled, x, cfg))
    return float(np.abs(d - k_cartan_target(kc.K)).max())
