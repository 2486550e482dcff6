"""Scenario catalog, configuration parsing and the verification pipeline."""

import hashlib
import io
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ambient, fields, immersion as imm_mod, mesh as mesh_mod, spectrum, tone
from ._numerics import DEFAULT_SEED
from .errors import ConfigError, EmptyScanError, ParameterError, SpectoneError, StageError

__all__ = [
    "Scenario",
    "parse_config",
    "load_scenario",
    "list_scenarios",
    "run_scenario",
    "run_catalog",
    "report_to_json",
    "emit_plot_data",
    "available_series",
    "THREADS_ENV",
]

THREADS_ENV = "SPECTONE_THREADS"
_REQUIRED = object()


# -- configuration -----------------------------------------------------------------------

class _Reader:
    """Typed access to the parsed document with field paths and line numbers in errors."""

    def __init__(self, data, text, source):
        self.data, self.text, self.source = data, text, source

    def line_of(self, path):
        parts = path.split(".")
        lines = self.text.splitlines()
        for cut in range(len(parts) - 1, -1, -1):
            table, key = ".".join(parts[:cut]), parts[cut]
            start = 0
            if table:
                hdr = [i for i, ln in enumerate(lines) if ln.strip() == f"[{table}]"]
                if not hdr:
                    continue
                start = hdr[0]
            for i in range(start, len(lines)):
                if i > start and table and lines[i].lstrip().startswith("["):
                    break
                if re.match(rf"\s*{re.escape(key)}\s*=", lines[i]):
                    return i + 1
            hdr = [i for i, ln in enumerate(lines) if ln.strip() == f"[{'.'.join(parts[:cut + 1])}]"]
            if hdr:
                return hdr[0] + 1
        return None

    def fail(self, path, message):
        raise ConfigError(f"{self.source}: {message}", field=path, line=self.line_of(path))

    def get(self, table, path, key, types, default=_REQUIRED):
        full = f"{path}.{key}" if path else key
        if key not in table:
            if default is _REQUIRED:
                self.fail(full, "missing required key")
            return default
        val = table[key]
        if types is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, types) or (isinstance(val, bool) and types is not bool):
            name = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
            self.fail(full, f"expected {name}, got {type(val).__name__}")
        return val

    def floats(self, table, path, key, length=None, default=_REQUIRED):
        val = self.get(table, path, key, list, default)
        if val is default and default is not _REQUIRED:
            return default
        full = f"{path}.{key}"
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
            self.fail(full, "expected a list of numbers")
        if length is not None and len(val) != length:
            self.fail(full, f"expected {length} numbers, got {len(val)}")
        return [float(x) for x in val]

    def table(self, table, path, key, default=_REQUIRED):
        return self.get(table, path, key, dict, default)


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario document.  ``text`` is kept for provenance hashing."""

    name: str
    description: str
    seed: int
    data: dict
    text: str
    source: str
    expected: dict = field(default_factory=dict)

    @property
    def config_hash(self):
        return hashlib.sha256(self.text.encode()).hexdigest()


_SECTIONS = {"name", "description", "seed", "space", "immersion", "field", "function", "claims", "parameters",
             "mesh", "cheeger", "profile", "expected", "samples"}


def parse_config(text, source="<config>"):
    """Parse and validate a scenario document (TOML)."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"{source}: {exc}", line=int(m.group(1)) if m else None) from exc
    rd = _Reader(data, text, source)
    for key in data:
        if key not in _SECTIONS:
            rd.fail(key, f"unknown section; known: {', '.join(sorted(_SECTIONS))}")
    name = rd.get(data, "", "name", str)
    description = rd.get(data, "", "description", str, "")
    seed = rd.get(data, "", "seed", int, DEFAULT_SEED)
    expected = rd.table(data, "", "expected", {})
    for k, v in expected.items():
        allowed = v if isinstance(v, list) else [v]
        if not allowed or any(x not in (tone.HOLDS, tone.VIOLATED, tone.INCONCLUSIVE) for x in allowed):
            rd.fail(f"expected.{k}", "verdicts are holds, violated or inconclusive")
    scen = Scenario(name, description, seed, data, text, source, expected)
    # build once so that bad references fail at parse time
    _build(scen)
    return scen


def _builtin_dir():
    return resources.files("spectone") / "scenarios"


def _builtin_names():
    return sorted(p.name[:-5] for p in _builtin_dir().iterdir() if p.name.endswith(".toml"))


def load_scenario(ref):
    """A built-in scenario by name, or a scenario file path."""
    if isinstance(ref, Scenario):
        return ref
    path = Path(ref)
    if path.suffix == ".toml" or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {ref}: {exc}") from exc
        return parse_config(text, str(path))
    if ref in _builtin_names():
        return parse_config((_builtin_dir() / f"{ref}.toml").read_text(), f"{ref}.toml")
    raise ConfigError(f"no scenario named {ref!r}; available: {', '.join(_builtin_names())}")


def list_scenarios():
    """``(name, description)`` pairs of the built-in catalog in a stable order."""
    out = []
    for name in _builtin_names():
        text = (_builtin_dir() / f"{name}.toml").read_text()
        out.append((name, tomllib.loads(text).get("description", "")))
    return out


# -- object construction -------------------------------------------------------------------

@dataclass
class _Objects:
    space: object
    imm: object
    fld: object
    spec: object
    region: dict


def _space(rd, cfg, path):
    kind = rd.get(cfg, path, "kind", str)
    if kind == "euclidean":
        return ambient.euclidean(rd.get(cfg, path, "dim", int))
    if kind == "hyperbolic_ball":
        return ambient.hyperbolic_ball(rd.get(cfg, path, "dim", int), rd.get(cfg, path, "curvature", float, -1.0))
    if kind == "spherical_cap":
        return ambient.spherical_cap(rd.get(cfg, path, "dim", int), rd.get(cfg, path, "curvature", float, 1.0))
    if kind == "product":
        first = _space(rd, rd.table(cfg, path, "first"), f"{path}.first")
        second = _space(rd, rd.table(cfg, path, "second"), f"{path}.second")
        return ambient.product(first, second)
    rd.fail(f"{path}.kind", f"unknown space {kind!r}; known: euclidean, hyperbolic_ball, spherical_cap, product")


def _immersion(rd, cfg, space):
    path = "immersion"
    kind = rd.get(cfg, path, "kind", str)
    if kind == "catenoid":
        imm = imm_mod.catenoid(rd.get(cfg, path, "c", float, 1.0), rd.floats(cfg, path, "v_range", 2),
                               rd.floats(cfg, path, "u_range", 2, [0.0, 2 * math.pi]))
    elif kind == "sphere":
        imm = imm_mod.sphere(rd.get(cfg, path, "radius", float), rd.floats(cfg, path, "theta_range", 2))
    elif kind == "plane":
        imm = imm_mod.plane(space, rd.floats(cfg, path, "lo", 2), rd.floats(cfg, path, "hi", 2),
                            rd.get(cfg, path, "offset", float, 0.0))
    elif kind == "spiral":
        imm = imm_mod.spiral(rd.get(cfg, path, "a", float), rd.get(cfg, path, "b", float),
                             rd.floats(cfg, path, "t_range", 2))
    elif kind == "graph":
        if not isinstance(space, ambient.ProductSpace):
            rd.fail(f"{path}.kind", "graph immersions need a product space")
        a = rd.get(cfg, path, "linear_map", list)
        try:
            a = np.asarray(a, dtype=float)
        except (TypeError, ValueError):
            rd.fail(f"{path}.linear_map", "expected a matrix of numbers")
        m = space.split_index
        lo, hi = rd.floats(cfg, path, "lo", m), rd.floats(cfg, path, "hi", m)
        if a.shape != (space.dim - m, m):
            rd.fail(f"{path}.linear_map", f"expected shape {(space.dim - m, m)}, got {a.shape}")
        imm = imm_mod.graph(a, lo, hi, space)
    else:
        rd.fail(f"{path}.kind", f"unknown immersion {kind!r}; known: catenoid, sphere, plane, spiral, graph")
    if kind in ("catenoid", "sphere", "spiral") and not isinstance(space, ambient.EuclideanSpace):
        rd.fail("space.kind", f"the {kind} immersion lives in Euclidean space")
    if kind in ("catenoid", "sphere") and space.dim != 3 or kind == "spiral" and space.dim != 2:
        rd.fail("space.dim", f"wrong ambient dimension for {kind}")
    region = rd.table(cfg, path, "region", None)
    info = None
    if region is not None:
        rpath = f"{path}.region"
        rkind = rd.get(region, rpath, "kind", str)
        radius = rd.get(region, rpath, "radius", float)
        if radius <= 0:
            rd.fail(f"{rpath}.radius", "radius must be positive")
        if rkind == "geodesic_disk":
            if not isinstance(space, ambient.ConstantCurvatureBall):
                rd.fail(f"{rpath}.kind", "geodesic disks need a constant-curvature model")
            chart = float(space.chart_of_radius(radius))
        elif rkind == "disk":
            chart = radius
        else:
            rd.fail(f"{rpath}.kind", f"unknown region {rkind!r}; known: disk, geodesic_disk")
        center = rd.floats(region, rpath, "center", 2, [0.0, 0.0])
        imm = imm_mod.restrict(imm, imm_mod.disk_region(chart, center), f"{rkind}({radius:g})")
        info = {"kind": rkind, "radius": radius, "chart_radius": chart, "center": center}
    return imm, info


def _function(rd, cfg, space):
    path = "function"
    kind = rd.get(cfg, path, "kind", str)
    if kind == "half_r_squared":
        return fields.half_r_squared(space, rd.floats(cfg, path, "base", space.dim, None))
    if kind == "half_rho_squared":
        if not isinstance(space, ambient.ProductSpace):
            rd.fail(f"{path}.kind", "half_rho_squared needs a product space")
        return fields.half_rho_squared(space, rd.floats(cfg, path, "x0", space.split_index, None))
    rd.fail(f"{path}.kind", f"unknown function {kind!r}; known: half_r_squared, half_rho_squared")


def _field(rd, cfg, space, spec):
    path = "field"
    kind = rd.get(cfg, path, "kind", str)
    if kind == "position":
        return fields.position_field(space, rd.floats(cfg, path, "base", space.dim, None))
    if kind == "gradient":
        if spec is None:
            rd.fail(f"{path}.kind", "a gradient field needs a [function] section")
        return fields.gradient_field(spec)
    rd.fail(f"{path}.kind", f"unknown field {kind!r}; known: position, gradient")


def _build(scen):
    rd = _Reader(scen.data, scen.text, scen.source)
    d = scen.data
    try:
        space = _space(rd, rd.table(d, "", "space"), "space")
        imm, region = _immersion(rd, rd.table(d, "", "immersion"), space)
        spec = _function(rd, d["function"], space) if "function" in d else None
        fld = _field(rd, d["field"], space, spec) if "field" in d else None
    except ConfigError:
        raise
    except SpectoneError as exc:
        raise ConfigError(f"{scen.source}: {exc}") from exc
    claims = rd.table(d, "", "claims", {})
    if "minimal" in claims:
        imm = replace(imm, minimal_claimed=rd.get(claims, "claims", "minimal", bool))
    params = rd.table(d, "", "parameters", {})
    cand = rd.get(params, "parameters", "candidate", str, "none")
    if cand not in ("none", "thm3", "prop3"):
        rd.fail("parameters.candidate", "candidate must be none, thm3 or prop3")
    if cand == "thm3" and spec is None:
        rd.fail("parameters.candidate", "thm3 needs a [function] section")
    if cand == "prop3" and fld is None:
        rd.fail("parameters.candidate", "prop3 needs a [field] section")
    eps = rd.floats(params, "parameters", "eps", None, [])
    if any(b >= a for a, b in zip(eps, eps[1:])) or any(e <= 0 for e in eps):
        rd.fail("parameters.eps", "eps must be positive and strictly decreasing")
    r = params.get("R", "sup")
    if not (r == "sup" or isinstance(r, (int, float)) and not isinstance(r, bool) and r > 0):
        rd.fail("parameters.R", "R is a positive number or \"sup\"")
    mesh = rd.table(d, "", "mesh", {})
    dom = rd.get(mesh, "mesh", "domain", str, "none")
    if dom not in ("none", "box", "disk"):
        rd.fail("mesh.domain", "domain must be none, box or disk")
    if dom == "disk" and region is None:
        rd.fail("mesh.domain", "a disk domain needs an immersion region")
    return _Objects(space, imm, fld, spec, region), rd


# -- pipeline -----------------------------------------------------------------------------

def _finite(x):
    if isinstance(x, (fields.Unbounded,)):
        return "inf"
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_finite(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def _verdict(name, margin, uncertainty, tolerance, detail=None):
    v = tone.verdict(margin, uncertainty + tolerance)
    out = {"verdict": v, "margin": float(margin), "uncertainty": float(uncertainty), "tolerance": float(tolerance)}
    if detail:
        out["detail"] = detail
    return out


def _sweep_values(kind, objs, points, rd):
    imm = objs.imm
    if kind == "h_composed":
        if objs.spec is None:
            rd.fail("cheeger.sweep", "h_composed sweep needs a [function] section")
        return objs.spec.value(imm.point(points))
    if kind == "xtop_norm":
        if objs.fld is None:
            rd.fail("cheeger.sweep", "xtop_norm sweep needs a [field] section")
        return imm_mod.xtop_norm(imm, objs.fld, points)
    m = re.fullmatch(r"coordinate:(\d+)", kind)
    if m and int(m.group(1)) < imm.m:
        return points[:, int(m.group(1))]
    rd.fail("cheeger.sweep", f"unknown sweep {kind!r}; known: h_composed, xtop_norm, coordinate:<axis>")


def _domain_meshes(objs, cfg):
    imm = objs.imm
    dom = cfg.get("domain", "none")
    if dom == "box":
        n = [int(x) for x in cfg.get("n", [32] * imm.m)]
        if imm.m == 1:
            return (mesh_mod.interval_mesh(imm.lo[0], imm.hi[0], n[0]),
                    mesh_mod.interval_mesh(imm.lo[0], imm.hi[0], max(n[0] // 2, 2)))
        per = tuple(imm.periodic)
        return (mesh_mod.box_mesh(imm.lo, imm.hi, n, per),
                mesh_mod.box_mesh(imm.lo, imm.hi, [max(k // 2, 2) for k in n], per))
    rings = int(cfg.get("rings", 16))
    r, c = objs.region["chart_radius"], objs.region["center"]
    return mesh_mod.disk_mesh(r, rings, c), mesh_mod.disk_mesh(r, max(rings // 2, 2), c)


class _Pipeline:
    def __init__(self, scen):
        self.scen = scen
        self.stages = {}
        self.series = {}
        self.verdicts = {}
        self.failure = None
        self.ctx = {}

    def run(self, name, fn):
        if self.failure is not None:
            return None
        try:
            out = fn()
        except Exception as exc:  # every stage failure is reported with its tag
            self.failure = {"stage": name, "error": type(exc).__name__, "message": str(exc)}
            self.error = StageError(name, exc)
            return None
        if out is not None:
            self.stages[name] = out
        return out


def run_scenario(config, strict=False):
    """Run the verification pipeline of one scenario and return its report document.

    Stages: build, certify, conformality, condition6, suprema, profile,
    candidate, domain, cheeger, exhaustion, tone.  A failing stage stops the
    run; the report then carries ``status = "failed"`` and the stage tag.
    With ``strict`` the :class:`StageError` is raised instead.
    """
    if isinstance(config, Scenario):
        scen = config
    else:
        try:
            scen = load_scenario(config)
        except ConfigError as exc:
            if strict:
                raise StageError("config", exc) from exc
            return _finite({"scenario": str(config), "status": "failed",
                            "failure": {"stage": "config", "error": "ConfigError", "message": str(exc)}})
    P = _Pipeline(scen)
    d = scen.data
    seed = scen.seed
    samples = d.get("samples", {})
    n_samples = int(samples.get("n", 4096))
    params = d.get("parameters", {})
    claims = d.get("claims", {})
    mesh_cfg = d.get("mesh", {})
    alpha = float(params.get("alpha", 1.0))
    tol = float(params.get("tolerance", 1e-6))

    def build():
        objs, rd = _build(scen)
        P.ctx.update(objs=objs, rd=rd)
        imm = objs.imm
        return {"space": objs.space.name, "immersion": imm.name, "m": imm.m, "n": imm.n,
                "region": objs.region, "params": imm.params, "claims": claims}

    P.run("build", build)

    def certify():
        imm = P.ctx["objs"].imm
        sup_h = imm_mod.estimate_supremum(
            imm, lambda q: imm.space.norm(imm.point(q), imm_mod.second_fundamental_form(imm, q)[1]),
            n_samples=n_samples, seed=seed)
        P.ctx["sup_H"] = sup_h
        out = {"sup_H": sup_h.as_dict(), "tolerance": tol}
        if claims.get("minimal"):
            imm_mod.certify_minimal(imm, n_samples, tol, seed)
            P.verdicts["minimal_certificate"] = _verdict("minimal_certificate", tol - sup_h.value, 0.0, 0.0)
        return out

    P.run("certify", certify)

    def conformality():
        objs = P.ctx["objs"]
        if objs.fld is None:
            return None
        pts = objs.imm.point(objs.imm.sample(n_samples, seed))
        est = fields.estimate_conformality(objs.space, objs.fld, pts, n_samples, seed)
        a_tr, b_tr = imm_mod.trace_conformality(objs.imm, objs.fld, n_samples=n_samples, seed=seed)
        out = {"ambient": est.as_dict(), "trace": {"alpha_trace": a_tr, "beta_trace": b_tr}, "alpha_used": alpha}
        source = params.get("alpha_source", "ambient")
        got = a_tr if source == "trace" else est.alpha_est
        P.verdicts["alpha_claim"] = _verdict("alpha_claim", got - alpha, 0.0, tol, f"{source} estimate")
        if objs.imm.name == "graph":
            sv = np.linalg.svd(np.asarray(objs.imm.params["linear_map"]), compute_uv=False)
            lam = np.zeros(objs.imm.m)
            lam[: sv.size] = sv
            C = float(np.max(lam**2))
            out["graph"] = {"singular_values": lam, "C": C, "frame_lower_bound": 1.0 / (1.0 + C)}
            P.verdicts["trace_convexity"] = _verdict("trace_convexity", a_tr - 1.0 / (1.0 + C), 0.0, tol)
        return out

    P.run("conformality", conformality)

    def condition6():
        objs = P.ctx["objs"]
        if objs.fld is None or not params.get("condition6", True):
            return None
        try:
            rep = imm_mod.check_condition6(objs.imm, objs.fld, alpha_prime_max=alpha, n_samples=n_samples,
                                           seed=seed)
        except EmptyScanError as exc:
            P.verdicts["condition6"] = {"verdict": tone.INCONCLUSIVE, "margin": None, "uncertainty": 0.0,
                                        "tolerance": 0.0, "detail": str(exc)}
            return {"skipped": str(exc)}
        P.ctx["alpha_prime"] = rep.alpha_prime_est
        P.series["condition6"] = (("t", "ratio"), np.stack([rep.t, rep.ratio], axis=1))
        P.verdicts["condition6"] = _verdict("condition6", alpha - rep.alpha_prime_est, 0.0, 0.0)
        return rep.as_dict()

    P.run("condition6", condition6)

    def suprema():
        objs = P.ctx["objs"]
        imm, fld = objs.imm, objs.fld
        out = {}
        if fld is not None:
            P.ctx["sup_xtop"] = imm_mod.estimate_supremum(imm, lambda q: imm_mod.xtop_norm(imm, fld, q),
                                                          n_samples=n_samples, seed=seed)
            P.ctx["sup_xf"] = imm_mod.estimate_supremum(
                imm, lambda q: imm.space.norm(imm.point(q), fld.value(imm.point(q))), n_samples=n_samples,
                seed=seed)
            out["xtop"] = P.ctx["sup_xtop"].as_dict()
            out["xf"] = P.ctx["sup_xf"].as_dict()
        if objs.spec is not None:
            P.ctx["sup_hF"] = imm_mod.estimate_supremum(imm, lambda q: objs.spec.value(imm.point(q)),
                                                        n_samples=n_samples, seed=seed)
            out["h_composed"] = P.ctx["sup_hF"].as_dict()
        return out

    P.run("suprema", suprema)

    def profile():
        if "profile" not in d:
            return None
        return _spiral_profile(P, d["profile"])

    P.run("profile", profile)

    def candidate():
        objs = P.ctx["objs"]
        kind = params.get("candidate", "none")
        if kind == "none":
            return None
        imm = objs.imm
        R = params.get("R", "sup")
        if kind == "thm3":
            R = P.ctx["sup_hF"].value if R == "sup" else float(R)
            X = tone.thm3_field(imm, objs.spec, R, seed=seed)
            defining = tone.h_composed_defining(imm, objs.spec, R)
            P.ctx["bound"] = lambda e: imm.m * alpha / e
            out = {"kind": "thm3", "R": R, "bound": "m alpha / eps"}
        else:
            R = P.ctx["sup_xtop"].value if R == "sup" else float(R)
            a_prime = float(params.get("alpha_prime", P.ctx.get("alpha_prime", math.nan)))
            X = tone.prop3_field(imm, objs.fld, R, alpha, a_prime, delta=float(params.get("delta", 1e-3)),
                                 seed=seed)
            defining = tone.norm_xtop_defining(imm, objs.fld, X.params["R_used"])
            C = X.params["C"]
            P.ctx["bound"] = lambda e: C * imm.m * alpha / e**2
            out = {"kind": "prop3", "R": R, "R_used": X.params["R_used"], "delta": X.params["delta"],
                   "alpha_prime": a_prime, "C": C, "bound": "C m alpha / eps^2"}
        P.ctx["candidate"], P.ctx["defining"] = X, defining
        return out

    P.run("candidate", candidate)

    def domain():
        objs = P.ctx["objs"]
        if mesh_cfg.get("domain", "none") == "none":
            return None
        imm = objs.imm
        fine, coarse = _domain_meshes(objs, mesh_cfg)
        P.ctx["meshes"] = (fine, coarse)
        res = spectrum.dirichlet_eigenvalue(imm, fine, coarse)
        P.ctx["eigen"] = res
        out = {"eigen": res.as_dict(), "n_vertices": fine.n_vertices, "n_cells": len(fine.cells)}
        barta_tol = 10.0 * res.refinement_estimate + spectrum.RESIDUAL_TOL * res.lambda1
        X = P.ctx.get("candidate")
        if X is not None:
            c_inf = tone.c_of_field(imm, X, fine)
            P.ctx["c_inf_domain"] = c_inf
            out["c_inf"] = c_inf
            P.verdicts["barta_domain"] = _verdict("barta_domain", res.lambda1 - c_inf, 0.0, barta_tol)
        if mesh_cfg.get("probe", False):
            probe = spectrum.barta_equality_probe(imm, fine, res)
            gap = abs(probe - res.lambda1) / res.lambda1
            out["probe"] = {"c_inf": probe, "relative_gap": gap}
            P.verdicts["barta_probe_bound"] = _verdict("barta_probe_bound", res.lambda1 - probe, 0.0, barta_tol)
            P.verdicts["barta_probe_equality"] = _verdict("barta_probe_equality", 0.05 - gap, 0.0, 0.0)
        return out

    P.run("domain", domain)

    def cheeger():
        if "cheeger" not in d or "meshes" not in P.ctx:
            return None
        objs, rd = P.ctx["objs"], P.ctx["rd"]
        kind = rd.get(d["cheeger"], "cheeger", "sweep", str)
        nt = int(d["cheeger"].get("n_thresholds", 256))
        fine, coarse = P.ctx["meshes"]
        sw = tone.cheeger_sweep(objs.imm, fine, _sweep_values(kind, objs, fine.vertices, rd), nt)
        swc = tone.cheeger_sweep(objs.imm, coarse, _sweep_values(kind, objs, coarse.vertices, rd), nt)
        unc = abs(sw.upper_bound - swc.upper_bound)
        P.ctx["cheeger"] = (sw.upper_bound, unc)
        P.series["cheeger"] = (("t", "ratio"), np.stack([sw.thresholds, sw.ratios], axis=1))
        out = {"sweep": kind, "upper_bound": sw.upper_bound, "threshold": sw.threshold, "uncertainty": unc}
        if "sup_xtop" in P.ctx and P.ctx["sup_xtop"].value > 1e-8 * max(1.0, P.ctx["sup_xf"].value):
            lower = objs.imm.m * alpha / P.ctx["sup_xtop"].value
            out["paper_lower"] = lower
            u_lower = lower * P.ctx["sup_xtop"].uncertainty / P.ctx["sup_xtop"].value
            P.verdicts["cheeger_sandwich"] = _verdict("cheeger_sandwich", sw.upper_bound - lower, unc + u_lower,
                                                      tol)
        return out

    P.run("cheeger", cheeger)

    def exhaustion():
        eps = params.get("eps", [])
        if not eps or "candidate" not in P.ctx:
            return None
        objs = P.ctx["objs"]
        center = mesh_cfg.get("band_center")
        axis = int(mesh_cfg.get("band_axis", 1))
        regular = tone.regular_eps(objs.imm, P.ctx["defining"], eps, axis=axis, center=center)
        dropped = [e for e in eps if e not in regular]
        if not regular:
            raise ParameterError("no eps in the sequence gives a regular band level")
        eps = regular
        table = spectrum.exhaustion_study(objs.imm, P.ctx["defining"], eps, P.ctx["candidate"], P.ctx["bound"],
                                          n_along=int(mesh_cfg.get("band_along", 48)),
                                          n_across=int(mesh_cfg.get("band_across", 8)),
                                          axis=axis, center=center)
        P.series["exhaustion"] = (spectrum.ExhaustionTable.COLUMNS,
                                  np.array([[getattr(r, k) for k in spectrum.ExhaustionTable.COLUMNS]
                                            for r in table.rows]))
        worst = min(r.margin / r.paper_bound for r in table.rows)
        P.verdicts["exhaustion_bound"] = _verdict("exhaustion_bound", worst, 0.0, tol,
                                                  "min relative margin of c_inf over the paper bound")
        lams = [r.lambda_fem for r in table.rows]
        growth = min(b / a - 1.0 for a, b in zip(lams, lams[1:])) if len(lams) > 1 else math.inf
        P.verdicts["exhaustion_monotone"] = _verdict("exhaustion_monotone", growth, 0.0, 0.0,
                                                     "min relative growth of lambda_fem as eps decreases")
        slack = min(r.lambda_fem - r.c_inf + 10.0 * r.refinement_estimate for r in table.rows)
        P.verdicts["barta_bands"] = _verdict("barta_bands", slack, 0.0, 0.0)
        return {**table.as_dict(), "eps_dropped": dropped}

    P.run("exhaustion", exhaustion)

    def tone_stage():
        objs = P.ctx["objs"]
        if objs.fld is None:
            return None
        sx, sf, sh = P.ctx.get("sup_xtop"), P.ctx.get("sup_xf"), P.ctx.get("sup_H")
        res = P.ctx.get("eigen")
        ch = P.ctx.get("cheeger")
        unc = {"sup_xf": sf.uncertainty, "sup_xtop": sx.uncertainty}
        if res is not None:
            unc["lambda_fem"] = res.refinement_estimate
        if ch is not None:
            unc["cheeger"] = ch[1]
        sup_rho = None
        if isinstance(objs.space, ambient.ProductSpace) and objs.spec is not None:
            sup_rho = math.sqrt(2.0 * P.ctx["sup_hF"].value)
            unc["sup_rho"] = P.ctx["sup_hF"].uncertainty / max(sup_rho, 1e-300)
        rows = P.stages.get("exhaustion", {}).get("rows", [])
        rep = tone.inequality_report(
            objs.imm.m, alpha, sup_xf=sf.value, sup_xtop=sx.value,
            sup_h=None if sh is None else sh.value,
            cheeger_upper=None if ch is None else ch[0],
            lambda_fem=None if res is None else res.lambda1,
            minimal=bool(claims.get("minimal", False)), sup_rho=sup_rho, uncertainty=unc,
            c_inf=P.ctx.get("c_inf_domain"),
            bound_paper=rows[-1]["paper_bound"] if rows else None,
        )
        for c in rep.checks:
            P.verdicts[f"tone_{c.name}"] = {"verdict": c.verdict, "margin": c.margin,
                                            "uncertainty": c.uncertainty, "tolerance": 0.0}
        return rep.as_dict()

    P.run("tone", tone_stage)

    if P.failure is not None and strict:
        raise P.error

    mismatches = []
    for key, want in sorted(scen.expected.items()):
        allowed = want if isinstance(want, list) else [want]
        got = P.verdicts.get(key, {}).get("verdict", "missing")
        if got not in allowed:
            mismatches.append({"verdict": key, "expected": allowed, "computed": got})
    fine = P.ctx.get("meshes", (None,))[0]
    report = {
        "scenario": scen.name,
        "description": scen.description,
        "status": "ok" if P.failure is None else "failed",
        "failure": P.failure,
        "provenance": {
            "config_sha256": scen.config_hash,
            "seed": seed,
            "n_samples": n_samples,
            "mesh": {k: mesh_cfg[k] for k in sorted(mesh_cfg)},
            "mesh_vertices": None if fine is None else fine.n_vertices,
            "mesh_h": None if fine is None else fine.h,
        },
        "stages": P.stages,
        "verdicts": P.verdicts,
        "expected_mismatches": mismatches,
        "series": {k: {"columns": list(cols), "rows": rows} for k, (cols, rows) in P.series.items()},
    }
    return _finite(report)


def _spiral_profile(P, cfg):
    """``sup_{[0, T]} |X_top|`` and ``r(gamma(T))`` for a decade ladder of ``T``."""
    objs = P.ctx["objs"]
    imm, fld = objs.imm, objs.fld
    if imm.m != 1:
        raise ParameterError("the profile stage is defined for curves")
    T = float(cfg.get("T", imm.hi[0]))
    per_unit = int(cfg.get("points_per_unit", 20000))
    t0 = float(imm.lo[0])
    ts = np.linspace(t0, T, int(per_unit * (T - t0)) + 1)
    vals = imm_mod.xtop_norm(imm, fld, ts[:, None])
    running = np.maximum.accumulate(vals)
    base = float(objs.space.distance(np.zeros(2), imm.point(np.array([t0]))))
    ladder = [T / 10.0**k for k in range(int(cfg.get("decades", 1)), -1, -1)]
    sups = [float(running[np.searchsorted(ts, x, side="right") - 1]) for x in ladder]
    r_end = float(objs.space.distance(np.zeros(2), imm.point(np.array([T]))))
    increase = sups[-1] - sups[-2]
    growth = r_end / base
    stride = max(1, len(ts) // 2000)
    P.series["xtop_profile"] = (("t", "xtop"), np.stack([ts[::stride], vals[::stride]], axis=1))
    P.verdicts["xbar_bounded"] = _verdict("xbar_bounded", 1e-6 - increase, 0.0, 0.0,
                                          "sup |X_top| increase over the last decade of T")
    P.verdicts["unbounded"] = _verdict("unbounded", growth - 1e3, 0.0, 0.0, "r(gamma(T)) / r(gamma(0)) vs 1e3")
    return {"T_ladder": ladder, "sup_xtop": sups, "last_decade_increase": increase, "r_start": base,
            "r_end": r_end, "r_growth": growth}


def report_to_json(report):
    """Canonical text of a report: sorted keys, fixed separators."""
    return json.dumps(report, sort_keys=True, indent=1, allow_nan=False) + "\n"


def run_catalog(names=None, threads=None, strict=False):
    """Run several scenarios; ``threads`` defaults to ``$SPECTONE_THREADS`` or 1."""
    names = [n for n, _ in list_scenarios()] if names is None else list(names)
    if threads is None:
        try:
            threads = int(os.environ.get(THREADS_ENV, "1"))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    threads = max(1, threads)
    if threads == 1:
        return {n: run_scenario(n, strict) for n in names}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda n: run_scenario(n, strict), names))
    return dict(zip(names, results))


def available_series(report):
    return sorted(report.get("series", {}))


def emit_plot_data(report, which, path=None):
    """CSV text of a report series (header row first); ``eps`` series sorted descending."""
    series = report.get("series", {})
    if which not in series:
        raise ParameterError(f"unknown series {which!r}; available: {', '.join(available_series(report)) or 'none'}")
    cols = series[which]["columns"]
    rows = list(series[which]["rows"])
    if cols and cols[0] == "eps":
        rows.sort(key=lambda r: -r[0])
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(repr(float(x)) if isinstance(x, (int, float)) else str(x) for x in r) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
