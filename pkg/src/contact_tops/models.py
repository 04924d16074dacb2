"""Frame models: a chart (or the unit sphere in R^4) with three frame fields.

Declaring the frame orthonormal defines the metric.  Frame fields are
evaluated in batches: ``model.frame_fn(x)`` maps points of shape (..., n)
to an array of shape (..., 3, n) whose row ``i`` is the field ``X_{i+1}``
written in chart (or ambient) coordinates.

Public functions taking frame *indices* use the 1-based convention
(``X_1, X_2, X_3``); arrays are indexed from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .expr import DEFAULT_FD, FDConfig, compile_expr, compile_exprs, eval_expr, jacobian_fd, parse, variables

TWO_PI = 2 * math.pi


class ModelError(ValueError):
    pass


class DegenerateFrameError(ModelError):
    pass


class DomainError(ModelError):
    pass


# --- domains ---------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Sampling domain: a coordinate box, a 2pi-periodic box, or the unit 3-sphere."""

    kind: str
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("box", "periodic", "sphere"):
            raise ModelError(f"unknown domain kind {self.kind!r}")
        if self.kind != "sphere":
            if len(self.lo) != len(self.hi) or not self.lo:
                raise ModelError("box bounds must be non-empty and of equal length")
            if any(b <= a for a, b in zip(self.lo, self.hi)):
                raise ModelError("empty domain box")

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        return cls("box", tuple(map(float, lo)), tuple(map(float, hi)))

    @classmethod
    def periodic(cls, dim: int = 3) -> "Domain":
        return cls("periodic", (0.0,) * dim, (TWO_PI,) * dim)

    @classmethod
    def sphere(cls) -> "Domain":
        return cls("sphere")

    @property
    def dim(self) -> int:
        return 4 if self.kind == "sphere" else len(self.lo)

    def sample(self, n: int, seed: int = 42) -> np.ndarray:
        """``n`` scrambled-Halton points, deterministic in ``seed``."""
        if self.kind == "sphere":
            u = qmc.Halton(3, scramble=True, seed=seed).random(n)
            # uniform unit quaternions from the unit cube
            r1, r2 = np.sqrt(1 - u[:, 0]), np.sqrt(u[:, 0])
            a, b = TWO_PI * u[:, 1], TWO_PI * u[:, 2]
            return np.stack([r2 * np.cos(b), r1 * np.sin(a), r1 * np.cos(a), r2 * np.sin(b)], axis=-1)
        u = qmc.Halton(self.dim, scramble=True, seed=seed).random(n)
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + u * (hi - lo)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Pull a point back onto the constraint set (sphere only)."""
        if self.kind == "sphere":
            return x / np.linalg.norm(x, axis=-1, keepdims=True)
        return x

    def display(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "periodic":
            return np.mod(x, TWO_PI)
        return x

    def to_json(self):
        if self.kind == "sphere":
            return {"kind": "sphere"}
        return {"kind": self.kind, "box": [[a, b] for a, b in zip(self.lo, self.hi)]}


# --- models ----------------------------------------------------------------

def top_table(c: float, k: float) -> np.ndarray:
    """Structure constants of the pattern [X1,X2]=cX3, [X2,X3]=kX1, [X3,X1]=kX2."""
    t = np.zeros((3, 3, 3))
    for (i, j, m), v in {(0, 1, 2): c, (1, 2, 0): k, (2, 0, 1): k}.items():
        t[i, j, m], t[j, i, m] = v, -v
    return t


@dataclass(frozen=True, eq=False)
class FrameModel:
    name: str
    kind: str
    coords: tuple[str, ...]
    domain: Domain
    frame_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    orientation: int = 1
    analytic_structure: np.ndarray | None = field(default=None, repr=False)
    source: dict | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("chart3", "embedded4"):
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.orientation not in (1, -1):
            raise ModelError("orientation must be +1 or -1")
        if (self.kind == "embedded4") != (self.domain.kind == "sphere"):
            raise ModelError("embedded4 models live on the unit sphere and only there")
        if len(self.coords) != self.dim:
            raise ModelError(f"{self.kind} needs {self.dim} coordinates")
        if self.analytic_structure is not None:
            t = np.asarray(self.analytic_structure, dtype=float)
            if t.shape != (3, 3, 3) or not np.allclose(t, -t.transpose(1, 0, 2), atol=0, rtol=0):
                raise ModelError("analytic structure must be a (3,3,3) table antisymmetric in i,j")

    @property
    def dim(self) -> int:
        return 4 if self.kind == "embedded4" else 3

    def frame(self, x) -> np.ndarray:
        return np.asarray(self.frame_fn(np.asarray(x, dtype=float)))

    def without_structure(self) -> "FrameModel":
        """Same frame with the analytic table dropped, forcing numeric brackets."""
        return replace(self, analytic_structure=None, name=self.name + "[fd]")


def _basis_matrix(m: FrameModel, x: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Square matrix whose columns are the frame vectors (and the normal on S^3)."""
    cols = np.swapaxes(frame, -1, -2)
    if m.kind == "embedded4":
        cols = np.concatenate([cols, x[..., :, None]], axis=-1)
    return cols


def frame_at(m: FrameModel, x) -> np.ndarray:
    """Frame vectors at ``x`` (rows), with domain and degeneracy checks."""
    x = np.asarray(x, dtype=float)
    if m.kind == "embedded4":
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1) > 1e-9):
            raise DomainError("point is not on the unit sphere")
    frame = m.frame(x)
    det = np.linalg.det(_basis_matrix(m, x, frame))
    if np.any(np.abs(det) < 1e-10):
        raise DegenerateFrameError(f"degenerate frame in model {m.name!r}")
    if m.kind == "embedded4":
        tangency = np.einsum("...ia,...a->...i", frame, x)
        if np.any(np.abs(tangency) > 1e-9):
            raise ModelError("frame vectors are not tangent to the sphere")
    return frame


def _solve(basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(basis, v[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise DegenerateFrameError("degenerate frame") from None


def _split(m: FrameModel, comps: np.ndarray, with_normal: bool):
    if m.kind == "embedded4":
        return (comps[..., :3], comps[..., 3]) if with_normal else comps[..., :3]
    return (comps, np.zeros(comps.shape[:-1])) if with_normal else comps


def to_frame_components(m: FrameModel, x, v, frame=None, with_normal: bool = False):
    """Express chart/ambient vectors ``v`` at ``x`` in the frame basis.

    On the sphere the optional second output is the component along the
    outward normal, which vanishes for tangent vectors.
    """
    x = np.asarray(x, dtype=float)
    frame = m.frame(x) if frame is None else frame
    comps = _solve(_basis_matrix(m, x, frame), np.asarray(v, dtype=float))
    return _split(m, comps, with_normal)


def bracket_table_fd(m: FrameModel, x, cfg: FDConfig = DEFAULT_FD, with_normal: bool = False):
    """All brackets [X_i, X_j] in frame components, shape (..., 3, 3, 3).

    Uses ``[X, Y] = DY.X - DX.Y`` with central-difference Jacobians of the
    coefficient functions; sphere points are projected first.
    """
    x = m.domain.project(np.asarray(x, dtype=float))
    n = m.dim
    frame = m.frame(x)
    flat = lambda y: m.frame_fn(y).reshape(y.shape[:-1] + (3 * n,))
    jac = jacobian_fd(flat, x, cfg).reshape(x.shape[:-1] + (3, n, n))
    # d[i, j] = D(X_j) . X_i
    d = np.einsum("...jab,...ib->...ija", jac, frame)
    vec = d - np.swapaxes(d, -3, -2)
    basis = _basis_matrix(m, x, frame)[..., None, None, :, :]
    return _split(m, _solve(basis, vec), with_normal)


def lie_bracket_fd(m: FrameModel, i: int, j: int, x, cfg: FDConfig = DEFAULT_FD) -> np.ndarray:
    """Frame components of ``[X_i, X_j]`` at ``x`` (1-based indices)."""
    if not (1 <= i <= 3 and 1 <= j <= 3):
        raise ModelError("frame indices are 1, 2 or 3")
    return bracket_table_fd(m, x, cfg)[..., i - 1, j - 1, :]


# --- constructors ----------------------------------------------------------

def chart_model(name: str, coords: Sequence[str], frame: Sequence[Sequence[str]],
                domain: Domain, orientation: int = 1, structure=None,
                kind: str = "chart3", params: dict | None = None) -> FrameModel:
    """Build a model from coefficient expressions, one row per frame field."""
    coords = tuple(coords)
    if len(frame) != 3 or any(len(row) != len(coords) for row in frame):
        raise ModelError(f"frame must be 3 rows of {len(coords)} expressions")
    parsed = [[parse(src, coords) for src in row] for row in frame]
    # constant entries are evaluated once; only the rest is recomputed per call
    const = np.zeros((3, len(coords)))
    slots, exprs = [], []
    for i, row in enumerate(parsed):
        for a, e in enumerate(row):
            if variables(e):
                slots.append(i * len(coords) + a)
                exprs.append(e)
            else:
                const[i, a] = eval_expr(e, {})
    varying = compile_exprs(exprs, coords) if exprs else None

    def frame_fn(x):
        out = np.empty(x.shape[:-1] + (const.size,))
        out[...] = const.ravel()
        if varying is not None:
            out[..., slots] = varying(x)
        return out.reshape(x.shape[:-1] + const.shape)

    table = None if structure is None else np.asarray(structure, dtype=float)
    source = {"kind": kind, "coords": list(coords), "domain": domain.to_json(),
              "frame": [list(row) for row in frame], "orientation": orientation}
    if table is not None:
        source["structure"] = [[i + 1, j + 1, k + 1, float(table[i, j, k])]
                               for i in range(3) for j in range(i + 1, 3) for k in range(3)
                               if table[i, j, k] != 0]
    return FrameModel(name, kind, coords, domain, frame_fn, orientation, table, source, params or {})


def _num(v: float) -> str:
    return repr(float(v))


def builtin_model(name: str, **params) -> FrameModel:
    """Models from the worked examples: flat3, torus3, torus3_skew, s3, heisenberg,
    const_structure."""
    xyz = ("x", "y", "z")
    ts = ("t1", "t2", "t3")
    qs = ("q1", "q2", "q3", "q4")
    if name == "flat3":
        return chart_model("flat3", xyz, [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
                           Domain.box([-1] * 3, [1] * 3), structure=np.zeros((3, 3, 3)))
    if name == "torus3":
        n = params.get("n", 1)
        if int(n) != n or n < 1:
            raise ModelError("torus3 needs a positive integer n")
        n = int(n)
        u = f"{n}*t1"
        frame = [["0", f"cos({u})", f"sin({u})"], ["0", f"-sin({u})", f"cos({u})"], ["1", "0", "0"]]
        return chart_model(f"torus3(n={n})", ts, frame, Domain.periodic(),
                           structure=top_table(0.0, n), params={"n": n})
    if name == "torus3_skew":
        eps = float(params.get("eps", math.sqrt(2) - 1))
        e = _num(eps)
        u = f"(t1 + {e}*t2)"
        frame = [[f"-{e}*cos{u}", f"cos{u}", f"sin{u}"],
                 [f"{e}*sin{u}", f"-sin{u}", f"cos{u}"],
                 ["1", e, "0"]]
        # cos(t1 + eps t2) is not 2pi-periodic in t2 for irrational eps: sample a box
        return chart_model(f"torus3_skew(eps={eps})", ts, frame, Domain.box([0] * 3, [TWO_PI] * 3),
                           structure=top_table(0.0, 1 + eps * eps), params={"eps": eps})
    if name == "s3":
        return _s3_model("s3", 1.0, 1.0)
    if name == "heisenberg":
        return _heisenberg_model("heisenberg", 1.0)
    if name == "const_structure":
        c, k = float(params["c"]), float(params["k"])
        label = f"const_structure(c={c}, k={k})"
        if c == 0 and k == 0:
            return replace(builtin_model("flat3"), name=label, params={"c": c, "k": k})
        if c == 0:
            u = f"{_num(k)}*t1"
            frame = [["0", f"cos({u})", f"sin({u})"], ["0", f"-sin({u})", f"cos({u})"], ["1", "0", "0"]]
            return chart_model(label, ts, frame, Domain.box([0] * 3, [TWO_PI] * 3),
                               structure=top_table(0.0, k), params={"c": c, "k": k})
        if k == 0:
            return replace(_heisenberg_model(label, c), params={"c": c, "k": k})
        if c * k > 0:
            # (a qi, a qj, b qk) has c = 2a^2/b and k = 2b
            b = k / 2
            a = math.sqrt(c * k) / 2
            return replace(_s3_model(label, a, b), params={"c": c, "k": k})
        raise ModelError("const_structure with c*k < 0 (SL2 type) has no chart realization here")
    raise ModelError(f"unknown builtin model {name!r}")


def _s3_model(label: str, a: float, b: float) -> FrameModel:
    qs = ("q1", "q2", "q3", "q4")
    # right multiplication by i, j, k written in real coordinates
    qi = ["-q2", "q1", "q4", "-q3"]
    qj = ["-q3", "-q4", "q1", "q2"]
    qk = ["-q4", "q3", "-q2", "q1"]
    scale = lambda s, row: row if s == 1 else [f"{_num(s)}*{e}" for e in row]
    c, k = 2 * a * a / b, 2 * b
    return chart_model(label, qs, [scale(a, qi), scale(a, qj), scale(b, qk)], Domain.sphere(),
                       structure=top_table(c, k), kind="embedded4")


def _heisenberg_model(label: str, c: float) -> FrameModel:
    x2 = "x" if c == 1 else f"{_num(c)}*x"
    return chart_model(label, ("x", "y", "z"), [["1", "0", "0"], ["0", x2, "1"], ["0", "1", "0"]],
                       Domain.box([-1] * 3, [1] * 3), structure=top_table(c, 0.0))


# --- derived frames --------------------------------------------------------

def transform_frame(m: FrameModel, matrix, name: str | None = None) -> FrameModel:
    """Constant change of frame ``Y_j = sum_i T[i, j] X_i`` (columns of T are the new fields).

    The analytic table is dropped: brackets of the result are measured.
    """
    t = np.asarray(matrix, dtype=float)
    if t.shape != (3, 3):
        raise ModelError("transition matrix must be 3x3")
    det = np.linalg.det(t)
    if abs(det) < 1e-12:
        raise ModelError("singular transition matrix")
    base = m.frame_fn

    def frame_fn(x):
        return np.einsum("ij,...ia->...ja", t, base(x))

    source = None
    if m.source is not None:
        source = {"transform": {"base": m.source, "matrix": t.tolist()}}
    return replace(m, name=name or f"{m.name}*T", frame_fn=frame_fn, analytic_structure=None,
                   orientation=int(m.orientation * np.sign(det)), source=source)


def rotate_frame(m: FrameModel, angle, name: str | None = None) -> FrameModel:
    """Rotate (X1, X2) about X3 by a position-dependent angle.

    ``angle`` is an expression in the model coordinates or a batched callable.
    The new frame is ``Y1 = cos(a) X1 + sin(a) X2``, ``Y2 = -sin(a) X1 + cos(a) X2``.
    """
    source = None
    if isinstance(angle, str):
        expr_src = angle
        angle_fn = compile_expr(parse(angle, m.coords), m.coords)
        if m.source is not None:
            source = {"rotate": {"base": m.source, "angle": expr_src}}
    else:
        angle_fn = angle
    base = m.frame_fn

    def frame_fn(x):
        f = base(x)
        a = np.broadcast_to(angle_fn(x), x.shape[:-1])[..., None]
        ca, sa = np.cos(a), np.sin(a)
        return np.stack([ca * f[..., 0, :] + sa * f[..., 1, :],
                         -sa * f[..., 0, :] + ca * f[..., 1, :],
                         f[..., 2, :]], axis=-2)

    return replace(m, name=name or f"{m.name}~rot", frame_fn=frame_fn,
                   analytic_structure=None, source=source)


def permute_frame(m: FrameModel, order: Sequence[int], name: str | None = None) -> FrameModel:
    """Reorder the frame; ``order`` lists the old 1-based indices of the new fields."""
    perm = [i - 1 for i in order]
    if sorted(perm) != [0, 1, 2]:
        raise ModelError("order must be a permutation of 1, 2, 3")
    t = np.zeros((3, 3))
    for new, old in enumerate(perm):
        t[old, new] = 1.0
    out = transform_frame(m, t, name=name or f"{m.name}{tuple(order)}")
    if m.analytic_structure is not None:
        s = m.analytic_structure[np.ix_(perm, perm, perm)]
        out = replace(out, analytic_structure=s)
    return out
