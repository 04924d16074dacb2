"""Command-line front end.

    contact-tops classify --model s3
    contact-tops contact-circle --model torus3 --n 2
    contact-tops geodesic --model heisenberg --duration 5 --out traj.csv

Structured reports go to stdout as JSON, time series and grids as CSV.
Exit status: 0 when the verdict passes, 2 when it fails, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import forms, geodesics, tops
from .expr import ExprError
from .frame_calc import curvature_tensor, sectional_from_tensor
from .models import Domain, FrameModel, ModelError, builtin_model, chart_model, frame_at, \
    rotate_frame, transform_frame

COMMANDS = ("classify", "verify-top", "curvature", "geodesic", "contact-circle", "build-top", "spinning")
DEFAULT_TOL = {"classify": 1e-5, "verify-top": 1e-5, "curvature": 1e-6, "geodesic": 1e-6,
               "contact-circle": 1e-7, "build-top": 1e-6, "spinning": 1e-6}


class SpecError(ValueError):
    pass


# --- spec loading ----------------------------------------------------------

def _domain(d) -> Domain:
    if isinstance(d, list):
        return Domain.box([b[0] for b in d], [b[1] for b in d])
    kind = d.get("kind", "box")
    if kind == "sphere":
        return Domain.sphere()
    if kind == "periodic" and "box" not in d:
        return Domain.periodic()
    box = d["box"]
    return Domain(kind, tuple(float(b[0]) for b in box), tuple(float(b[1]) for b in box))


def _structure(entries):
    if entries is None:
        return None
    arr = np.asarray(entries, dtype=float)
    if arr.shape == (3, 3, 3):
        return arr
    table = np.zeros((3, 3, 3))
    for i, j, k, v in entries:
        table[int(i) - 1, int(j) - 1, int(k) - 1] = v
        table[int(j) - 1, int(i) - 1, int(k) - 1] = -v
    return table


def model_from_spec(spec: dict) -> FrameModel:
    """Build a model from a frame-spec document.

    Accepted forms: ``{"model": name, **params}``, ``{"model": {"name": ..., **params}}``,
    ``{"chart": {...}}`` (or the chart dict itself), ``{"rotate": {"base", "angle"}}``,
    ``{"transform": {"base", "matrix"}}`` and ``{"build_top": {"base", "h", "pivot", "basepoint"}}``.
    """
    if not isinstance(spec, dict):
        raise SpecError("frame spec must be a JSON object")
    if "model" in spec:
        desc = spec["model"]
        if isinstance(desc, str):
            params = {k: v for k, v in spec.items() if k != "model"}
            return builtin_model(desc, **params)
        params = dict(desc)
        return builtin_model(params.pop("name"), **params)
    if "rotate" in spec:
        r = spec["rotate"]
        return rotate_frame(model_from_spec(r["base"]), str(r["angle"]))
    if "transform" in spec:
        t = spec["transform"]
        return transform_frame(model_from_spec(t["base"]), t["matrix"])
    if "build_top" in spec:
        b = spec["build_top"]
        data = tops.extract_spinning_data(model_from_spec(b["base"]), int(b.get("pivot", 3)))
        return tops.build_top(data, b.get("h"), b.get("basepoint")).model
    chart = spec.get("chart", spec)
    try:
        frame = chart["frame"]
        coords = chart["coords"]
        dom = chart["domain"]
    except KeyError as exc:
        raise SpecError(f"frame spec is missing {exc.args[0]!r}") from None
    return chart_model(chart.get("name", "chart"), coords, frame, _domain(dom),
                       orientation=int(chart.get("orientation", 1)),
                       structure=_structure(chart.get("structure")),
                       kind=chart.get("kind", "embedded4" if _domain(dom).kind == "sphere" else "chart3"))


def _load(args) -> tuple[FrameModel, dict]:
    if (args.model is None) == (args.spec is None):
        raise SpecError("give exactly one of --model and --spec")
    if args.spec is not None:
        with open(args.spec) as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SpecError(f"malformed spec: {exc}") from None
    else:
        spec = {"model": args.model}
        for key in ("n", "eps", "c", "k"):
            if getattr(args, key) is not None:
                spec[key] = getattr(args, key)
    m = model_from_spec(spec)
    frame_at(m, m.domain.sample(8, args.seed))
    return m, spec


def _vector(text, size=None):
    if text is None:
        return None
    v = np.array([float(t) for t in text.split(",")])
    if size is not None and v.shape != (size,):
        raise SpecError(f"expected {size} comma-separated numbers, got {text!r}")
    return v


# --- commands --------------------------------------------------------------

def _classify(m, args):
    tc = tops.classify_top(m, args.tol, seed=args.seed, n=args.samples)
    return tc.to_dict(), tc.is_top, None


def _verify_top(m, args):
    rep = geodesics.verify_top_conditions(m, args.geodesics, args.duration, args.step,
                                          args.tol, args.seed)
    return rep.to_dict(), rep.all_passed, None


def _curvature(m, args):
    tol = args.tol
    x = m.domain.sample(args.samples, args.seed)
    theta = np.linspace(0, 2 * np.pi, args.theta_grid, endpoint=False)
    phi = np.linspace(0, np.pi / 2, args.phi_grid)
    K = sectional_from_tensor(curvature_tensor(m, x), theta[None, :], phi[:, None])
    alpha = float(K[:, 0].mean())
    beta = float(K[:, -1].mean())
    law = alpha * np.cos(phi)[:, None] ** 2 + beta * np.sin(phi)[:, None] ** 2
    res = {
        "alpha": alpha, "beta": beta,
        "theta_spread": float((K.max(-1) - K.min(-1)).max()),
        "point_spread": float(np.ptp(K, axis=0).max()),
        "law_residual": float(np.abs(K - law).max()),
        "min": float(K.min()), "max": float(K.max()),
    }
    res["law_holds"] = res["law_residual"] < tol and res["theta_spread"] < tol
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point"] + [f"x{i + 1}" for i in range(m.dim)] + ["phi", "theta", "K"])
    for p in range(len(x)):
        for a, ph in enumerate(phi):
            for b, th in enumerate(theta):
                w.writerow([p] + [repr(float(v)) for v in x[p]] + [repr(float(ph)), repr(float(th)),
                                                                  repr(float(K[p, a, b]))])
    return res, res["law_holds"], buf.getvalue()


def _geodesic(m, args):
    x0 = _vector(args.x0, m.dim)
    x0 = tops.default_basepoint(m) if x0 is None else x0
    a0 = _vector(args.a0, 3)
    a0 = np.array([0.6, 0.0, 0.8]) if a0 is None else a0 / np.linalg.norm(a0)
    traj = geodesics.integrate_geodesics(m, x0, a0, args.duration, args.step)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(m.dim)] + ["a1", "a2", "a3", "rot13", "rot3v"])
    for n in range(len(traj.t)):
        row = [traj.t[n], *traj.x[n], *traj.a[n], traj.rot13[n], traj.rot3v[n]]
        w.writerow([repr(float(v)) for v in row])
    res = {
        "x0": x0.tolist(), "a0": a0.tolist(), "steps": len(traj.t) - 1,
        "max_speed_drift": traj.max_speed_drift, "max_constraint_drift": traj.max_constraint_drift,
        "rot13_spread": float(np.ptp(traj.rot13)), "rot3v_spread": float(np.ptp(traj.rot3v)),
        "a3_spread": float(np.ptp(traj.a[:, 2])),
    }
    return res, True, buf.getvalue()


def _contact_circle(m, args):
    u, w = _vector(args.u, 3), _vector(args.w, 3)
    circle = forms.FormCircle(tuple(u) if u is not None else (1.0, 0.0, 0.0),
                              tuple(w) if w is not None else (0.0, 1.0, 0.0))
    rep = forms.circle_report(m, circle, args.theta_grid, tol=args.tol,
                              seed=args.seed, n_points=args.samples)
    out = rep.to_dict()
    out["generators"] = [list(circle.u), list(circle.w)]
    return out, rep.classification == "contact circle", None


def _spinning(m, args):
    rep = tops.verify_spinning_metric(m, args.pivot, args.tol,
                                      seed=args.seed, n=args.samples, n_theta=args.theta_grid,
                                      n_phi=args.phi_grid)
    return rep.to_dict(), rep.passed, None


def _build_top(m, args, spec):
    tol = args.tol
    data = tops.extract_spinning_data(m, args.pivot, tol, seed=args.seed)
    res = tops.build_top(data, args.h, tol=tol, seed=args.seed)
    out = res.to_dict()
    out["frame_spec"] = {"build_top": {"base": spec, "pivot": args.pivot, "h": res.h,
                                       "basepoint": res.basepoint.tolist()}}
    out["c12_3"] = data.c12_3
    out["beta"] = data.beta
    return out, res.classification.is_top, None


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contact-tops", description="Tops and contact circles on frame models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", help="builtin model name")
    p.add_argument("--spec", help="frame-spec JSON file")
    p.add_argument("--n", type=int, help="torus3 winding number")
    p.add_argument("--eps", type=float, help="torus3_skew parameter")
    p.add_argument("--c", type=float, help="const_structure c")
    p.add_argument("--k", type=float, help="const_structure k")
    p.add_argument("--tol", type=float, help="tolerance (default depends on the command)")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--geodesics", type=int, default=20)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--theta-grid", type=int, default=None)
    p.add_argument("--phi-grid", type=int, default=11)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--pivot", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--h", type=float, help="build-top constant h")
    p.add_argument("--x0", help="geodesic start point, comma separated")
    p.add_argument("--a0", help="geodesic initial frame components, comma separated")
    p.add_argument("--u", help="first circle generator (coframe coefficients)")
    p.add_argument("--w", help="second circle generator (coframe coefficients)")
    p.add_argument("--out", help="write CSV output here")
    return p


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.theta_grid is None:
        args.theta_grid = 16 if args.command == "contact-circle" else 12
    if args.tol is None:
        args.tol = DEFAULT_TOL[args.command]
    try:
        m, spec = _load(args)
        if args.command == "build-top":
            results, ok, text = _build_top(m, args, spec)
        else:
            handler = {"classify": _classify, "verify-top": _verify_top, "curvature": _curvature,
                       "geodesic": _geodesic, "contact-circle": _contact_circle,
                       "spinning": _spinning}[args.command]
            results, ok, text = handler(m, args)
    except (ModelError, ExprError, SpecError, tops.TopError, forms.NotContactError,
            geodesics.IntegrationError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    params = {k.replace("_", "-"): v for k, v in sorted(vars(args).items()) if k != "command"}
    report = {"command": args.command, "model": m.name, "parameters": params,
              "seed": args.seed, "verdict": "pass" if ok else "fail", "results": results}
    if text is not None and args.out is not None:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    elif args.command == "geodesic":
        sys.stdout.write(text)
        return 0 if ok else 2
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False))
    return 0 if ok else 2


if __name__ == "__main__":
    raise SystemExit(main())
