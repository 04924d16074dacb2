"""Top classification, spinning metrics, top construction and frame transforms.

A frame is a top when its brackets follow the constant pattern

    [X1, X2] = c X3,   [X2, X3] = k X1,   [X3, X1] = k X2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc

from .expr import DEFAULT_FD, FDConfig
from .frame_calc import (field_properties, frame_derivative, jacobi_residual, sectional_from_tensor,
                         curvature_tensor, structure_functions)
from .models import FrameModel, ModelError, permute_frame, rotate_frame, to_frame_components, \
    transform_frame

PIVOT_ORDER = {1: (2, 3, 1), 2: (3, 1, 2), 3: (1, 2, 3)}


class TopError(ValueError):
    pass


class ShapeError(TopError):
    """Brackets do not have the spinning shape; ``witness`` names the entry."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


class InconsistentHError(TopError):
    pass


class PathDependenceError(TopError):
    pass


class InadmissibleTransformError(TopError):
    pass


# --- classification --------------------------------------------------------

@dataclass(frozen=True)
class TopClassification:
    is_top: bool
    c: float
    k: float
    algebra: str | None
    bundle_type: str | None
    alpha: float | None
    beta: float | None
    sasakian: bool | None
    spinning_direction_sign: int | str | None
    residuals: dict
    tol: float
    threshold: float
    n_points: int
    seed: int | None

    def to_dict(self) -> dict:
        return {
            "is_top": self.is_top, "c": self.c, "k": self.k, "algebra": self.algebra,
            "bundle_type": self.bundle_type, "alpha": self.alpha, "beta": self.beta,
            "sasakian": self.sasakian, "spinning_direction_sign": self.spinning_direction_sign,
            "residuals": self.residuals, "tol": self.tol, "threshold": self.threshold,
            "n_points": self.n_points, "seed": self.seed,
        }


def algebra_of(c: float, k: float, tol: float = 0.0) -> str:
    c = 0.0 if abs(c) <= tol else c
    k = 0.0 if abs(k) <= tol else k
    if c * k > 0:
        return "so3"
    if c * k < 0:
        return "sl2"
    if k != 0:
        return "e2"
    return "nil3" if c != 0 else "abelian"


def extremal_curvatures(c: float, k: float) -> tuple[float, float]:
    """(alpha, beta): curvature of planes containing X3, and of the plane X3 is normal to."""
    return c * c / 4, c * k - 0.75 * c * c


def _noise_floor(m: FrameModel, x, cfg: FDConfig) -> float:
    """Disagreement of the numeric brackets at steps h and 2h, zero for analytic tables."""
    if m.analytic_structure is not None:
        return 0.0
    c1 = structure_functions(m, x, cfg).c
    c2 = structure_functions(m, x, replace(cfg, h=2 * cfg.h)).c
    return float(np.abs(c1 - c2).max())


def _pattern(c: np.ndarray) -> dict:
    c12_3 = c[..., 0, 1, 2]
    c23_1 = c[..., 1, 2, 0]
    c31_2 = c[..., 2, 0, 1]
    mask = np.ones((3, 3, 3), bool)
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        mask[i, j, k] = mask[j, i, k] = False
    kk = 0.5 * (c23_1 + c31_2)
    return {
        "c_mean": float(c12_3.mean()), "k_mean": float(kk.mean()),
        "off_pattern": float(np.abs(c[..., mask]).max()),
        "k_mismatch": float(np.abs(c23_1 - c31_2).max()),
        "c_spread": float(c12_3.max() - c12_3.min()),
        "k_spread": float(kk.max() - kk.min()),
    }


def classify_top(m: FrameModel, tol: float = 1e-5, samples=None, seed: int = 42, n: int = 50,
                 cfg: FDConfig = DEFAULT_FD) -> TopClassification:
    """Measure the brackets at sample points and match them against the top pattern.

    A measured function counts as constant when its spread is below
    ``max(tol, 10 * noise floor)``.
    """
    x = m.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    c = structure_functions(m, x, cfg).c
    p = _pattern(c)
    thr = max(tol, 10 * _noise_floor(m, x, cfg))
    residuals = {key: p[key] for key in ("off_pattern", "k_mismatch", "c_spread", "k_spread")}
    is_top = all(v < thr for v in residuals.values())
    cv, kv = p["c_mean"], p["k_mean"]
    seed_out = seed if samples is None else None
    if not is_top:
        return TopClassification(False, cv, kv, None, None, None, None, None, None,
                                 residuals, tol, thr, len(x), seed_out)
    alpha, beta = extremal_curvatures(cv, kv)
    spin = kv - cv / 2
    spin = "degenerate" if abs(spin) < tol else int(np.sign(spin))
    return TopClassification(True, cv, kv, algebra_of(cv, kv, thr),
                             "contact" if abs(kv) > thr else "integrable", alpha, beta,
                             abs(cv) > thr, spin, residuals, tol, thr, len(x), seed_out)


def rotation_speed_law(tc: TopClassification, phi) -> np.ndarray:
    """Closed-form ``R(X1, X3) = (k - c/2) cos(phi)`` along a geodesic at angle phi to X3."""
    if not tc.is_top:
        raise TopError("rotation-speed law needs a top")
    return (tc.k - tc.c / 2) * np.cos(phi)


def relative_rotation(m1: FrameModel, m2: FrameModel, x) -> np.ndarray:
    """Angle of ``Y1`` (from ``m2``) measured in the (X1, X2) plane of ``m1``."""
    x = m1.domain.project(np.asarray(x, dtype=float))
    y1 = to_frame_components(m1, x, m2.frame(x)[..., 0, :])
    return np.arctan2(y1[..., 1], y1[..., 0])


# --- spinning metrics ------------------------------------------------------

def pivot_model(m: FrameModel, pivot: int) -> FrameModel:
    """Cyclically reorder the frame so that field ``pivot`` becomes the third."""
    if pivot not in PIVOT_ORDER:
        raise ModelError("pivot must be 1, 2 or 3")
    return m if pivot == 3 else permute_frame(m, PIVOT_ORDER[pivot], name=f"{m.name}[pivot {pivot}]")


@dataclass(frozen=True)
class SpinningReport:
    pivot: int
    killing_residual: float
    geodesic_residual: float
    theta_spread: float
    alpha_spread: float
    beta_spread: float
    law_residual: float
    alpha: float
    beta: float
    tol: float
    n_points: int
    n_theta: int
    n_phi: int
    seed: int | None

    @property
    def passed(self) -> bool:
        return all(v < self.tol for v in (self.killing_residual, self.geodesic_residual,
                                          self.theta_spread, self.alpha_spread, self.beta_spread))

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["passed"] = self.passed
        return out


def verify_spinning_metric(m: FrameModel, pivot: int = 3, tol: float = 1e-6, samples=None,
                           seed: int = 42, n: int = 20, n_theta: int = 12, n_phi: int = 11,
                           cfg: FDConfig = DEFAULT_FD) -> SpinningReport:
    """Pivot must be a unit Killing geodesic field; sectional curvature of a
    plane at angle phi from the pivot must not depend on theta nor on the point."""
    mp = pivot_model(m, pivot)
    x = mp.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    props = field_properties(mp, (0.0, 0.0, 1.0), tol, samples=x, cfg=cfg)
    theta = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    phi = np.linspace(0, np.pi / 2, n_phi)
    K = sectional_from_tensor(curvature_tensor(mp, x, cfg), theta[None, :], phi[:, None])  # (P, phi, theta)
    theta_spread = float((K.max(axis=-1) - K.min(axis=-1)).max())
    a_pts, b_pts = K[:, 0].mean(axis=-1), K[:, -1].mean(axis=-1)
    alpha, beta = float(a_pts.mean()), float(b_pts.mean())
    law = alpha * np.cos(phi)[:, None] ** 2 + beta * np.sin(phi)[:, None] ** 2
    return SpinningReport(pivot, props.killing_residual, props.geodesic_residual, theta_spread,
                          float(np.ptp(a_pts)), float(np.ptp(b_pts)), float(np.abs(K - law).max()),
                          alpha, beta, tol, len(x), n_theta, n_phi,
                          seed if samples is None else None)


@dataclass(frozen=True)
class SpinningMetricData:
    """Spinning frame (pivot last) with its measured bracket functions.

    ``structure(x)`` returns the full bracket table; replacing it lets callers
    study perturbed data on the same frame.
    """

    model: FrameModel
    pivot: int
    structure: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    c12_3: float
    beta: float
    shape_residual: float
    jacobi_residual: float
    cfg: FDConfig = DEFAULT_FD

    def c12_1(self, x):
        return self.structure(x)[..., 0, 1, 0]

    def c12_2(self, x):
        return self.structure(x)[..., 0, 1, 1]

    def c23_1(self, x):
        return self.structure(x)[..., 1, 2, 0]


SHAPE_ZERO = {"c23^2": (1, 2, 1), "c23^3": (1, 2, 2), "c31^1": (2, 0, 0), "c31^3": (2, 0, 2)}


def extract_spinning_data(m: FrameModel, pivot: int = 3, tol: float = 1e-6, samples=None,
                          seed: int = 42, n: int = 20, cfg: FDConfig = DEFAULT_FD) -> SpinningMetricData:
    report = verify_spinning_metric(m, pivot, tol, samples, seed, n, cfg=cfg)
    if not report.passed:
        raise TopError(f"pivot {pivot} does not define a spinning metric: {report.to_dict()}")
    mp = pivot_model(m, pivot)
    x = mp.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    c = structure_functions(mp, x, cfg).c
    worst = 0.0
    for label, idx in SHAPE_ZERO.items():
        r = float(np.abs(c[(...,) + idx]).max())
        worst = max(worst, r)
        if r > tol:
            raise ShapeError(f"bracket component {label} does not vanish ({r:.3g})", {"component": label})
    r = float(np.abs(c[..., 1, 2, 0] - c[..., 2, 0, 1]).max())
    if r > tol:
        raise ShapeError(f"c23^1 != c31^2 ({r:.3g})", {"component": "c23^1 - c31^2"})
    worst = max(worst, r)
    c12_3 = c[..., 0, 1, 2]
    if np.ptp(c12_3) > tol:
        raise ShapeError("c12^3 is not constant", {"component": "c12^3"})
    jac = jacobi_residual(mp, x, cfg)
    if jac > max(tol, 1e-5):
        raise ShapeError(f"Jacobi identity fails ({jac:.3g})", {"component": "jacobi"})
    return SpinningMetricData(mp, pivot, lambda y: structure_functions(mp, y, cfg).c,
                              float(c12_3.mean()), report.beta, worst, jac, cfg)


def spinning_jacobi_rows(s: SpinningMetricData, x) -> np.ndarray:
    """The three Jacobi relations of the spinning shape, (..., 3).

    With a = c12^1, b = c12^2, e = c23^1:
    X1(e) - b e + Z(a),  X2(e) + a e + Z(b),  Z(c12^3).
    """
    x = np.asarray(x, dtype=float)
    c = s.structure(x)
    a, b, cc, e = c[..., 0, 1, 0], c[..., 0, 1, 1], c[..., 0, 1, 2], c[..., 1, 2, 0]
    D = frame_derivative(s.model, lambda y: s.structure(y)[..., [0, 0, 0, 1], [1, 1, 1, 2], [0, 1, 2, 0]],
                         x, s.cfg)  # D[..., i, f]: X_i of (a, b, c, e)
    return np.stack([D[..., 0, 3] - b * e + D[..., 2, 0],
                     D[..., 1, 3] + a * e + D[..., 2, 1],
                     D[..., 2, 2]], axis=-1)


def beta_from_data(s: SpinningMetricData, x) -> np.ndarray:
    """Extremal curvature from the bracket functions:
    -3/4 c^2 - a^2 - b^2 + c e - X2(a) + X1(b)."""
    x = np.asarray(x, dtype=float)
    c = s.structure(x)
    a, b, e = c[..., 0, 1, 0], c[..., 0, 1, 1], c[..., 1, 2, 0]
    cc = s.c12_3
    D = frame_derivative(s.model, lambda y: s.structure(y)[..., 0, 1, :2], x, s.cfg)
    return -0.75 * cc * cc - a * a - b * b + cc * e - D[..., 1, 0] + D[..., 0, 1]


def select_h(s: SpinningMetricData, h: float | None = None, tol: float = 1e-6) -> float:
    """The constant h with beta = c12^3 h - 3/4 (c12^3)^2; free (default 0) when c12^3 = 0."""
    c = s.c12_3
    if abs(c) <= tol:
        return 0.0 if h is None else float(h)
    forced = (s.beta + 0.75 * c * c) / c
    if h is not None and abs(s.beta - (c * h - 0.75 * c * c)) > tol:
        raise InconsistentHError(f"h={h} is inconsistent with beta={s.beta:.9g}; need h={forced:.9g}")
    return float(forced)


def alpha_form(s: SpinningMetricData, h: float) -> Callable[[np.ndarray], np.ndarray]:
    """Frame components ``(alpha(X1), alpha(X2), alpha(Z)) = (c12^1, c12^2, h - c23^1)``."""
    def alpha(x):
        c = s.structure(np.asarray(x, dtype=float))
        return np.stack([c[..., 0, 1, 0], c[..., 0, 1, 1], h - c[..., 1, 2, 0]], axis=-1)
    return alpha


def d_alpha_residual(s: SpinningMetricData, h: float, samples=None, seed: int = 42, n: int = 20) -> float:
    """Largest ``|d alpha(X_i, X_j)|`` with
    ``d alpha(X_i, X_j) = X_i(alpha_j) - X_j(alpha_i) - alpha([X_i, X_j])``."""
    m = s.model
    x = m.domain.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    alpha = alpha_form(s, h)
    D = frame_derivative(m, alpha, x, s.cfg)
    c = s.structure(x)
    da = D - np.swapaxes(D, -1, -2) - np.einsum("...ijk,...k->...ij", c, alpha(x))
    return float(np.abs(da).max())


# --- top construction ------------------------------------------------------

@dataclass(frozen=True)
class BuildTopResult:
    model: FrameModel
    classification: TopClassification
    psi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    h: float
    basepoint: np.ndarray
    d_alpha_residual: float
    path_residual: float
    loop_residuals: list

    def to_dict(self) -> dict:
        return {"h": self.h, "basepoint": self.basepoint.tolist(),
                "d_alpha_residual": self.d_alpha_residual, "path_residual": self.path_residual,
                "loop_residuals": self.loop_residuals,
                "classification": self.classification.to_dict()}


def default_basepoint(m: FrameModel) -> np.ndarray:
    d = m.domain
    if d.kind == "sphere":
        return np.array([1.0, 0.0, 0.0, 0.0])
    if d.kind == "periodic":
        return np.array(d.lo, dtype=float)
    return 0.5 * (np.array(d.lo) + np.array(d.hi))


def segment_integral(m: FrameModel, alpha, x0, x, n_nodes: int = 24) -> np.ndarray:
    """Gauss-Legendre line integral of the frame-component form ``alpha`` from
    ``x0`` to each ``x``: straight segments in a chart, great-circle arcs on S^3."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    s, w = leggauss(n_nodes)
    s, w = 0.5 * (s + 1), 0.5 * w
    s = s.reshape((-1,) + (1,) * x.ndim)
    if m.kind == "embedded4":
        cos = np.clip(np.sum(x * x0, axis=-1, keepdims=True), -1.0, 1.0)
        ang = np.arccos(cos)
        perp = x - cos * x0
        norm = np.linalg.norm(perp, axis=-1, keepdims=True)
        u = np.divide(perp, norm, out=np.zeros_like(perp), where=norm > 0)
        g = np.cos(s * ang) * x0 + np.sin(s * ang) * u
        dg = ang * (np.cos(s * ang) * u - np.sin(s * ang) * x0)
    else:
        d = x - x0
        g, dg = x0 + s * d[None], np.broadcast_to(d[None], (len(w),) + d.shape)
    comps = to_frame_components(m, g, dg)
    vals = np.sum(alpha(g) * comps, axis=-1)
    return np.tensordot(w, vals, axes=(0, 0))


def flow_integral(m: FrameModel, alpha, x0, times, steps: int = 64):
    """Flow X1, then X2, then X3 for the given times, integrating alpha with RK4.

    Returns the end points and the accumulated integrals, both batched over
    the leading axis of ``times``.
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    x = np.broadcast_to(np.asarray(x0, dtype=float), times.shape[:-1] + (m.dim,)).copy()
    acc = np.zeros(times.shape[:-1])
    proj = m.domain.project
    for i in range(3):
        dt = (times[..., i] / steps)[..., None]

        def rhs(y):
            y = proj(y)
            return m.frame(y)[..., i, :], alpha(y)[..., i]

        for _ in range(steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * dt * k1[0])
            k3 = rhs(x + 0.5 * dt * k2[0])
            k4 = rhs(x + dt * k3[0])
            x = proj(x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]))
            acc = acc + dt[..., 0] / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return x, acc


def _wrap(v: float) -> float:
    """Distance to the nearest multiple of 2 pi."""
    return float(abs((v + np.pi) % (2 * np.pi) - np.pi))


def build_top(s: SpinningMetricData, h: float | None = None, basepoint=None, tol: float = 1e-6,
              n_probes: int = 8, seed: int = 42, flow_time: float = 0.5,
              classify_tol: float = 1e-5) -> BuildTopResult:
    """Solve ``d psi = alpha`` from the basepoint and rotate (X1, X2) by psi.

    psi is evaluated by quadrature along segments (arcs on S^3); agreement with the
    frame-flow path (X1, then X2, then X3) at probe points is checked
    separately, as are the period loops of a periodic domain (up to 2 pi).
    The rotated frame is a top with constants (c12^3, h).
    """
    m = s.model
    h = select_h(s, h, tol)
    dres = d_alpha_residual(s, h, seed=seed)
    if dres > tol:
        raise PathDependenceError(f"alpha is not closed (residual {dres:.3g}); no rotation exists")
    x0 = m.domain.project(default_basepoint(m) if basepoint is None else np.asarray(basepoint, float))
    alpha = alpha_form(s, h)
    psi = lambda x: segment_integral(m, alpha, x0, x)
    times = flow_time * (2 * qmc.Halton(3, scramble=True, seed=seed).random(n_probes) - 1)
    ends, flow_vals = flow_integral(m, alpha, x0, times)
    path_res = float(np.abs(flow_vals - psi(ends)).max())
    if path_res > tol:
        raise PathDependenceError(f"integration paths disagree by {path_res:.3g}")
    loops = []
    if m.domain.kind == "periodic":
        for i in range(m.dim):
            end = x0.copy()
            end[i] += m.domain.hi[i] - m.domain.lo[i]
            loops.append(_wrap(float(psi(end[None])[0])))
        if max(loops) > tol:
            raise PathDependenceError(f"alpha has periods {loops} not in 2 pi Z: topological obstruction")
    rotated = rotate_frame(m, psi, name=f"{m.name}~top(h={h:g})")
    tc = classify_top(rotated, classify_tol, seed=seed)
    return BuildTopResult(rotated, tc, psi, h, x0, dres, path_res, loops)


# --- compatible transforms -------------------------------------------------

@dataclass(frozen=True)
class FrameTransform:
    lam: float
    mu: float
    nu: float
    O: np.ndarray = field(default_factory=lambda: np.eye(2))

    @property
    def matrix(self) -> np.ndarray:
        """Columns are the new fields: Y1 = lam O[:,0], Y2 = mu O[:,1], Y3 = nu X3."""
        t = np.zeros((3, 3))
        O = np.asarray(self.O, dtype=float)
        t[:2, 0] = self.lam * O[:, 0]
        t[:2, 1] = self.mu * O[:, 1]
        t[2, 2] = self.nu
        return t


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    diagnosis: str
    rho: float | None = None
    nu: float | None = None
    delta: int | None = None


def is_admissible_transform(t, tol: float = 1e-9) -> Admissibility:
    """Block shape (2x2 plus axis), axis scaling nonzero, and the 2x2 block a
    nonzero multiple of an orthogonal matrix."""
    T = t.matrix if isinstance(t, FrameTransform) else np.asarray(t, dtype=float)
    if T.shape != (3, 3):
        raise ValueError("transition matrix must be 3x3")
    if abs(np.linalg.det(T)) < 1e-12:
        raise InadmissibleTransformError("singular matrix")
    if max(np.abs(T[:2, 2]).max(), np.abs(T[2, :2]).max()) > tol:
        return Admissibility(False, "off-block coupling")
    A = T[:2, :2]
    rho2 = abs(np.linalg.det(A))
    if np.abs(A.T @ A - rho2 * np.eye(2)).max() > tol * max(1.0, rho2):
        return Admissibility(False, "planar block is not a multiple of an orthogonal matrix")
    return Admissibility(True, "admissible", float(np.sqrt(rho2)), float(T[2, 2]),
                         int(np.sign(np.linalg.det(A))))


@dataclass(frozen=True)
class TransformResult:
    model: FrameModel
    classification: TopClassification
    predicted: tuple[float, float]
    mismatch: float


def predicted_constants(c: float, k: float, adm: Admissibility) -> tuple[float, float]:
    """c' = c Delta rho^2 / nu and k' = k nu / Delta."""
    return c * adm.delta * adm.rho ** 2 / adm.nu, k * adm.nu / adm.delta


def apply_transform(m: FrameModel, t, tol: float = 1e-6, seed: int = 42) -> TransformResult:
    base = classify_top(m, tol, seed=seed)
    if not base.is_top:
        raise TopError(f"model {m.name!r} is not a top")
    adm = is_admissible_transform(t)
    if not adm.admissible:
        raise InadmissibleTransformError(adm.diagnosis)
    T = t.matrix if isinstance(t, FrameTransform) else np.asarray(t, dtype=float)
    new = transform_frame(m, T)
    tc = classify_top(new, tol, seed=seed)
    if not tc.is_top:
        raise TopError("transformed frame is not a top: internal inconsistency")
    pred = predicted_constants(base.c, base.k, adm)
    mismatch = max(abs(tc.c - pred[0]), abs(tc.k - pred[1]))
    return TransformResult(new, tc, pred, mismatch)
