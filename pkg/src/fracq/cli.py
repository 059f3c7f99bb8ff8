"""Command-line front end.

    fracq <command> [--config path] [--set key=value]...

The config file is JSON with a ``command`` field and one nested object per
command; ``--set`` overrides leaf keys by dotted path (``bubble.scale=2``, or
just ``scale=2`` for the active command).  Every run writes
``<out_dir>/<command>.json`` (schema 1) plus command-specific CSV and ``.gf3``
files, and prints one line per check.

Exit codes: 0 all checks pass, 1 some check failed, 2 configuration or
usage error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError

SCHEMA = 1

DEFAULTS = {
    "version": 1,
    "out_dir": "fracq_out",
    # physical defaults; command sections below override them where an
    # acceptance check needs a finer grid or a tighter box
    "physical": {"box": 40.0, "grid": 64, "tol": 1e-6},
    "verify-kernels": {"dims": [1, 3, 5], "tol": 1e-6, "tol_n5": 1e-4, "tol_const": 1e-10,
                       "gammas": [0.25, 0.75, 1.25], "perturb": 0.0},
    "verify-bessel": {"tol": 1e-7,
                      "identity1": [[0.5, 0.5, 1.0], [0.5, 1.0, 2.0], [1.5, 1.0, 1.0], [1.5, 2.0, 0.5],
                                    [2.5, 1.0, 3.0], [0.25, 0.7, 1.3], [0.75, 1.5, 0.4], [1.25, 0.3, 2.2],
                                    [3.5, 2.0, 1.5], [1.0, 1.0, 1.0]],
                      "identity2": [[0.5, 0.5], [0.5, 3.0], [1.5, 1.0], [1.5, 10.0], [2.5, 2.0],
                                    [0.25, 1.5], [0.75, 5.0], [1.25, 0.8], [3.5, 7.0], [1.0, 4.0]],
                      "identity3": [[0.5, 0.5, 1.0, 1.0], [1.0, 0.5, 1.0, 2.0], [1.5, 0.5, 2.0, 1.0],
                                    [2.0, 1.0, 1.0, 0.5], [1.5, 1.5, 0.5, 1.5], [2.5, 0.5, 1.0, 3.0],
                                    [0.75, 0.25, 1.5, 1.0], [3.0, 1.5, 2.0, 2.0], [1.25, 0.75, 0.7, 1.2],
                                    [2.5, 1.5, 1.0, 1.0]]},
    "bubble": {"scale": 1.0, "n": 128, "half_width": 16.0, "probe_radius": 4.0, "tol_residual": 1e-3,
               "tol_mass": 1e-3},
    "blowup": {"mode": "fixed_point", "phi": None, "k": [2, 4, 8], "Q": 1.0, "epsilon": 1.0, "n": 64,
               "damping": 0.5, "tol": 1e-10, "max_iter": 500, "away": 0.5,
               "candidates": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], "radii": [0.25, 0.5, 1.0],
               "bubble_k": [8, 16], "bubble_n": 128, "bubble_half_width": 1.5},
    "relation": {"function": "bubble", "path": None, "n": 64, "half_width": 8.0, "probe_radius": 2.0,
                 "tol": 2e-2, "refine": True, "min_improvement": 1.5},
    "pizzetti": {"seed": 0, "count": 5, "tol": 1e-8, "radius_range": [0.5, 2.0]},
    "brezis-merle": {"alpha": math.pi ** 2, "p": [0.5, 1.0, 1.5, 2.5, 3.0, 4.0], "n": 96,
                     "threshold": 1.15, "half_width": 1.0},
    "scan": {"scale": 1.0, "k": [1, 2, 4, 8, 16], "radii": [0.05, 0.1, 0.25, 0.5, 1.0], "n": 128,
             "half_width": 2.0, "Q": 2.0, "tol": 1e-3},
}

COMMANDS = [k for k in DEFAULTS if isinstance(DEFAULTS[k], dict) and k != "physical"]


# ---------------------------------------------------------------------------
# configuration


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg: dict, path: list, value, command: str):
    if path[0] not in cfg and path[0] != "command":
        path = [command] + path
    node = cfg
    for key in path[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError(f"unknown config section {'.'.join(path)}")
        node = node[key]
    if path[-1] not in node:
        raise ConfigError(f"unknown config key {'.'.join(path)}")
    node[path[-1]] = value


def _merge(base: dict, over: dict, where: str = ""):
    for key, val in over.items():
        if key == "command" and not where:
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict) and key != "phi":
            if not isinstance(val, dict):
                raise ConfigError(f"{where}{key} must be an object")
            _merge(base[key], val, f"{where}{key}.")
        else:
            base[key] = val


def load_config(command: str, path=None, overrides=()) -> dict:
    """Defaults, then the config file, then ``--set`` overrides."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("command", command) != command:
            raise ConfigError(f"config is for command {data['command']!r}, not {command!r}")
        _merge(cfg, data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        _set_path(cfg, key.strip().split("."), _parse_value(text.strip()), command)
    _validate(command, cfg[command])
    return cfg


def _positive(sec, *keys):
    for k in keys:
        v = sec[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigError(f"{k} must be a positive number, got {v!r}")


def _pow2(sec, *keys):
    for k in keys:
        v = sec[k]
        if not isinstance(v, int) or v < 4 or v & (v - 1):
            raise ConfigError(f"{k} must be a power of two >= 4, got {v!r}")


def _validate(command: str, sec: dict):
    if command == "verify-kernels":
        _positive(sec, "tol", "tol_n5", "tol_const")
    elif command == "verify-bessel":
        _positive(sec, "tol")
    elif command == "bubble":
        _positive(sec, "scale", "half_width", "probe_radius", "tol_residual", "tol_mass")
        _pow2(sec, "n")
    elif command == "blowup":
        if sec["mode"] not in ("fixed_point", "scaled_bubble"):
            raise ConfigError("blowup.mode must be fixed_point or scaled_bubble")
        if sec["mode"] == "fixed_point":
            phi = sec["phi"]
            if not isinstance(phi, dict) or "a" not in phi:
                raise ConfigError("blowup.phi is required: {\"a\": [a1, a2, a3]} or "
                                  "{\"coefficients\": [[e1, e2, e3, e4, c], ...]}")
        _positive(sec, "epsilon", "damping", "tol", "away", "bubble_half_width")
        _pow2(sec, "n", "bubble_n")
        if not sec["k"] or any(not (isinstance(k, (int, float)) and k > 0) for k in sec["k"]):
            raise ConfigError("blowup.k must be a list of positive numbers")
    elif command == "relation":
        if sec["function"] not in ("bubble", "gaussian", "custom"):
            raise ConfigError("relation.function must be bubble, gaussian or custom")
        if sec["function"] == "custom" and not sec["path"]:
            raise ConfigError("relation.path is required for a custom function")
        _positive(sec, "half_width", "probe_radius", "tol", "min_improvement")
        _pow2(sec, "n")
    elif command == "pizzetti":
        _positive(sec, "tol")
        if not isinstance(sec["count"], int) or sec["count"] < 0:
            raise ConfigError("pizzetti.count must be a nonnegative integer")
    elif command == "brezis-merle":
        _positive(sec, "alpha", "threshold", "half_width")
        if not isinstance(sec["n"], int) or sec["n"] < 8 or sec["n"] % 2:
            raise ConfigError(f"n must be an even integer >= 8, got {sec['n']!r}")
    elif command == "scan":
        _positive(sec, "scale", "half_width", "tol")
        _pow2(sec, "n")


# ---------------------------------------------------------------------------
# reporting


class Report:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.checks = []
        self.data = {}
        self.outputs = []

    def check(self, name, value, target, tol, passed=None, relative=False):
        value = float(value)
        if passed is None:
            err = abs(value - target)
            if relative and target != 0:
                err /= abs(target)
            passed = bool(err <= tol)
        self.checks.append({"name": name, "value": value, "target": target, "tolerance": tol,
                            "passed": bool(passed)})
        return passed

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def out_path(self, name: str) -> Path:
        d = Path(self.cfg["out_dir"])
        d.mkdir(parents=True, exist_ok=True)
        p = d / name
        self.outputs.append(str(p))
        return p

    def write(self) -> Path:
        path = self.out_path(f"{self.command}.json")
        doc = {"schema": SCHEMA, "command": self.command, "version": __version__,
               "passed": self.passed, "checks": self.checks, "data": self.data,
               "config": {"out_dir": self.cfg["out_dir"], self.command: self.cfg[self.command]},
               "defaults": DEFAULTS, "outputs": self.outputs}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------------------
# commands


def cmd_verify_kernels(rep: Report):
    from .kernels import (KernelKind, KernelSpec, d_gamma, d_tilde_gamma, kappa_n, kappa_n_gamma,
                          neumann_kernel, neumann_scattering_kernel, poisson_kernel, scattering_kernel)
    from .quad import integrate_radial

    sec = rep.cfg["verify-kernels"]
    fudge = 1.0 + float(sec["perturb"])
    for n in sec["dims"]:
        spec = KernelSpec(n)
        f = lambda r, spec=spec: poisson_kernel(spec, _radial_point(spec.n, r), 1.0)
        val = integrate_radial(f, n).value * fudge
        tol = sec["tol_n5"] if n >= 5 else sec["tol"]
        rep.check(f"poisson_mass_n{n}", val, 1.0, tol)
        lam = 1.7
        x = np.full(n, 0.3)
        ratio = poisson_kernel(spec, lam * x, lam * 0.8) * lam ** n / poisson_kernel(spec, x, 0.8)
        rep.check(f"poisson_scaling_n{n}", ratio, 1.0, 1e-12)
    rep.check("kappa_3", kappa_n(3) * fudge, 4 / math.pi ** 2, 1e-12)
    rep.check("kappa_3_3/2", kappa_n_gamma(3, 1.5) * fudge, kappa_n(3), sec["tol_const"])
    rep.check("d_1/2", d_gamma(0.5) * fudge, -1.0, sec["tol_const"])
    rep.check("d_3/2", d_gamma(1.5) * fudge, 3.0, sec["tol_const"])
    rep.check("d_tilde_3/2", d_tilde_gamma(1.5) * fudge, 0.5, sec["tol_const"])
    val = integrate_radial(lambda r: (1 + r * r) ** -2.0, 3).value * fudge
    rep.check("bubble_integral_pi2", val, math.pi ** 2, 1e-8)
    for n in sec["dims"]:
        for g in sec["gammas"]:
            if not g < n / 2:
                continue
            spec = KernelSpec(n, g, KernelKind.SCATTERING)
            f = lambda r, spec=spec: scattering_kernel(spec, _radial_point(spec.n, r), 1.0)
            val = integrate_radial(f, n).value * fudge
            rep.check(f"scattering_mass_n{n}_g{g:g}", val, 1.0, sec["tol_n5"] if n >= 5 else sec["tol"])
    # gamma -> n/2 continuity of the Neumann scattering kernel
    for n in sec["dims"]:
        spec_n = KernelSpec(n, kind=KernelKind.NEUMANN)
        x = np.full(n, 0.4)
        ref = neumann_kernel(spec_n, x, 0.5)
        g = n / 2 - 1e-7
        near = neumann_scattering_kernel(KernelSpec(n, g, KernelKind.SCATTERING), x, 0.5) * fudge
        rep.check(f"neumann_continuity_n{n}", near, ref, 1e-5, relative=True)


def _radial_point(n, r):
    p = np.zeros(n)
    p[0] = r
    return p if n > 1 else np.array([r])


def cmd_verify_bessel(rep: Report):
    from .specfun import verify_bessel_identity_1, verify_bessel_identity_2, verify_bessel_identity_3

    sec = rep.cfg["verify-bessel"]
    rows = []
    for name, fn, sweep in (("identity1", verify_bessel_identity_1, sec["identity1"]),
                            ("identity2", verify_bessel_identity_2, sec["identity2"]),
                            ("identity3", verify_bessel_identity_3, sec["identity3"])):
        for args in sweep:
            r = fn(*args)
            label = f"{name}(" + ",".join(f"{a:g}" for a in args) + ")"
            rep.check(label, r.residual, 0.0, sec["tol"])
            rows.append([name, json.dumps(args), r.lhs, r.rhs, r.residual])
    _write_csv(rep.out_path("verify-bessel.csv"), ["identity", "params", "lhs", "rhs", "residual"], rows)


def cmd_bubble(rep: Report):
    from .blowup import local_mass
    from .extension import spectral_fraclap
    from .fields import Box3
    from .liouville import LAMBDA_1, BubbleSpec, bubble_field, total_curvature

    sec = rep.cfg["bubble"]
    spec = BubbleSpec(scale=float(sec["scale"]))
    # lengths are in bubble widths 1 / lambda, so every scale sees the same grid problem
    width = 1.0 / spec.scale
    box = Box3.cube(float(sec["half_width"]) * width, int(sec["n"]))
    probe = float(sec["probe_radius"]) * width
    u = bubble_field(spec, box)
    lap = spectral_fraclap(u, 1.5)
    rhs = 2.0 * np.exp(3.0 * u.values)
    pts = box.points()
    mask = (np.linalg.norm(pts, axis=1) <= probe).reshape(box.shape)
    if probe > lap.meta.get("valid_radius", math.inf):
        raise ConfigError("probe_radius exceeds the valid radius of the spectral operator")
    resid = lap.values - rhs
    rel = float(np.max(np.abs(resid[mask])) / np.max(np.abs(rhs[mask])))
    rep.check("equation_residual", rel, 0.0, sec["tol_residual"])
    rep.check("total_curvature_quadrature", total_curvature(spec), LAMBDA_1, sec["tol_mass"], relative=True)
    grid_mass = local_mass(2.0, u, (0.0, 0.0, 0.0), math.inf)
    rep.check("total_curvature_grid", grid_mass, LAMBDA_1, sec["tol_mass"], relative=True)
    rep.data.update({"valid_radius": lap.meta.get("valid_radius"), "warnings": lap.meta.get("warnings", [])})
    lap.with_values(resid).save(rep.out_path("bubble_residual.gf3"))
    i3, i2 = box.shape[0] // 2, box.shape[1] // 2
    x1 = box.axes()[0]
    keep = x1 >= 0
    rows = zip(x1[keep], u.values[i3, i2][keep], lap.values[i3, i2][keep], rhs[i3, i2][keep])
    _write_csv(rep.out_path("bubble_profile.csv"), ["r", "u", "fraclap_u", "2exp3u"], rows)


def _profile_from(phi_cfg, n):
    from .fields import Box3
    from .liouville import BiharmonicProfile, kernel_class_poly

    box = Box3.cube(1.0, n, cell_centered=True)
    if "coefficients" in phi_cfg:
        coeffs = {tuple(int(e) for e in row[:4]): float(row[4]) for row in phi_cfg["coefficients"]}
        return BiharmonicProfile(coeffs, box)
    return kernel_class_poly(phi_cfg["a"], box)


def cmd_blowup(rep: Report):
    from .blowup import detect_S1
    from .fields import Box3
    from .liouville import BubbleSpec, blowup_sequence, scaled_family

    sec = rep.cfg["blowup"]
    if sec["mode"] == "scaled_bubble":
        box = Box3.cube(float(sec["bubble_half_width"]), int(sec["bubble_n"]))
        fam = [scaled_family(BubbleSpec(), k, box) for k in sec["bubble_k"]]
        cr = detect_S1(2.0, fam, sec["candidates"], sec["radii"])
        rep.data["concentration"] = cr.to_json()
        rep.out_path("concentration.csv").write_text(cr.to_csv(), encoding="utf-8")
        want = [tuple(map(float, sec["candidates"][0]))]
        rep.check("S1_is_first_candidate", float(cr.S1 == want), 1.0, 0.0)
        return
    prof = _profile_from(sec["phi"], int(sec["n"]))
    steps = blowup_sequence(prof, sec["k"], sec["Q"], sec["epsilon"], sec["away"], sec["damping"],
                            sec["tol"], int(sec["max_iter"]))
    rows = []
    for s in steps:
        r = s.result
        doc = r.to_json()
        doc.update({"sup_away": s.sup_away, "max_near_zero_set": s.max_near_zero_set})
        with open(rep.out_path(f"solve_k{s.k:g}.json"), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        s.u_k.save(rep.out_path(f"u_k{s.k:g}.gf3"))
        r.v_k.save(rep.out_path(f"v_k{s.k:g}.gf3"))
        rows.append([s.k, r.c_k, r.lambda_k, r.epsilon, r.residual, r.iterations, r.converged,
                     s.sup_away, s.max_near_zero_set])
        rep.check(f"converged_k{s.k:g}", r.residual, 0.0, sec["tol"], passed=r.converged)
        supv = float(np.max(np.abs(r.v_k.values)))
        rep.check(f"sup_v_k{s.k:g}", supv, 1.0, 0.0, passed=supv <= 1.0)
    _write_csv(rep.out_path("blowup_summary.csv"),
               ["k", "c_k", "lambda_k", "epsilon", "residual", "iterations", "converged", "sup_away",
                "max_near_zero_set"], rows)
    sups = [s.sup_away for s in steps]
    dec = all(b < a for a, b in zip(sups, sups[1:]))
    rep.check("sup_away_decreasing", float(dec), 1.0, 0.0)
    fam = [s.u_k for s in steps]
    cands = [c for c in sec["candidates"] if prof.domain.contains(np.asarray(c))[0]]
    if cands:
        cr = detect_S1(float(sec["Q"]), fam, cands, [r for r in sec["radii"] if r <= 1.0] or [0.5])
        rep.data["concentration"] = cr.to_json()
        rep.out_path("concentration.csv").write_text(cr.to_csv(), encoding="utf-8")
    rep.data["sup_away"] = sups


def _relation_field(sec, n):
    from .fields import Box3, DecayModel, GridField3
    from .liouville import BubbleSpec, bubble_field

    box = Box3.cube(float(sec["half_width"]), n)
    if sec["function"] == "bubble":
        return bubble_field(BubbleSpec(), box)
    x1, x2, x3 = box.mesh()
    return GridField3(box, np.exp(-(x1 ** 2 + x2 ** 2 + x3 ** 2) / 2), DecayModel.compact())


def cmd_relation(rep: Report):
    from .extension import check_relation
    from .fields import GridField3

    sec = rep.cfg["relation"]
    if sec["function"] == "custom":
        try:
            u = GridField3.load(sec["path"])
        except OSError as exc:
            raise ConfigError(f"cannot read {sec['path']}: {exc}") from exc
        levels = [u]
    else:
        ns = [int(sec["n"])] + ([2 * int(sec["n"])] if sec["refine"] else [])
        levels = [_relation_field(sec, n) for n in ns]
    rels = []
    rows = []
    for u in levels:
        r = check_relation(u, float(sec["probe_radius"]))
        rels.append(r.max_rel)
        n = u.box.resolution[0]
        rep.data[f"n{n}"] = {"max_rel": r.max_rel, "max_abs": r.max_abs, "mean_abs": r.mean_abs,
                             "scale": r.scale, "flagged": r.flagged, "probes": len(r.points)}
        rep.check(f"relation_n{n}", r.max_rel, 0.0, sec["tol"])
        rows += [[n, *p, t, s] for p, t, s in zip(r.points, r.trace, r.spectral)]
    if len(rels) == 2:
        imp = rels[0] / rels[1] if rels[1] > 0 else math.inf
        rep.check("refinement_improvement", imp, sec["min_improvement"], 0.0, passed=imp >= sec["min_improvement"])
    _write_csv(rep.out_path("relation.csv"), ["n", "x1", "x2", "x3", "trace", "spectral"], rows)


def cmd_pizzetti(rep: Report):
    from ._poly import Poly4, random_biharmonic
    from .blowup import pizzetti_check

    sec = rep.cfg["pizzetti"]
    rng = np.random.default_rng(int(sec["seed"]))
    r2 = Poly4({(2, 0, 0, 0): 1.0, (0, 2, 0, 0): 1.0, (0, 0, 2, 0): 1.0, (0, 0, 0, 2): 1.0})
    cases = [("|X|^2", r2, np.zeros(4), 1.0)]
    lo, hi = sec["radius_range"]
    for i in range(int(sec["count"])):
        cases.append((f"random_{i}", Poly4(random_biharmonic(rng)), rng.uniform(-1, 1, 4), rng.uniform(lo, hi)))
    rows = []
    for name, P, c, r in cases:
        chk = pizzetti_check(P, c, r, laplacian=P.laplacian)
        rep.check(f"pizzetti_{name}", chk.residual, 0.0, sec["tol"])
        rows.append([name, r, chk.mean_value, chk.predicted, chk.residual, chk.error])
    _write_csv(rep.out_path("pizzetti.csv"), ["case", "radius", "mean", "predicted", "residual", "error"], rows)


def cmd_brezis_merle(rep: Report):
    from .blowup import brezis_merle_probe, mollified_point_mass
    from .fields import Box3

    sec = rep.cfg["brezis-merle"]
    alpha = float(sec["alpha"])
    K = Box3.cube(float(sec["half_width"]), int(sec["n"]), cell_centered=True)
    rows = []
    classes = []
    for p in sec["p"]:
        r = brezis_merle_probe(lambda b: mollified_point_mass(b, alpha), float(p), K, int(sec["n"]),
                               float(sec["threshold"]))
        rows.append([p, r.coarse, r.value, r.trend, r.divergent])
        classes.append(r.divergent)
    pc = 2 * math.pi ** 2 / alpha
    flips = sum(a != b for a, b in zip(classes, classes[1:]))
    expected = [p > pc for p in sec["p"]]
    rep.check("single_flip", flips, 1, 0)
    rep.check("flip_at_critical_exponent", float(classes == expected), 1.0, 0.0)
    rep.data.update({"critical_p": pc, "trends": [r[3] for r in rows]})
    _write_csv(rep.out_path("brezis_merle.csv"), ["p", "coarse", "fine", "trend", "divergent"], rows)


def cmd_scan(rep: Report):
    from .blowup import local_mass
    from .fields import Box3
    from .liouville import LAMBDA_1, BubbleSpec, scaled_family

    sec = rep.cfg["scan"]
    box = Box3.cube(float(sec["half_width"]), int(sec["n"]))
    spec = BubbleSpec(scale=float(sec["scale"]))
    radii = sorted(float(r) for r in sec["radii"])
    h = float(box.spacing[0])
    rows = []
    for k in sec["k"]:
        u = scaled_family(spec, k, box)
        m = [local_mass(sec["Q"], u, (0.0, 0.0, 0.0), r) for r in radii]
        total = local_mass(sec["Q"], u, (0.0, 0.0, 0.0), math.inf)
        rows.append([k] + [v / LAMBDA_1 for v in m] + [total / LAMBDA_1])
        mono = all(b >= a * (1 - 1e-9) for a, b in zip(m, m[1:]))
        rep.check(f"monotone_k{k:g}", float(mono), 1.0, 0.0)
        # the total is only meaningful when the grid resolves this member
        width = 1.0 / (k * spec.scale)
        resolved = width >= 4 * h and sec["half_width"] >= 8 * width
        rows[-1].append(int(resolved))
        if resolved:
            rep.check(f"total_k{k:g}", total, LAMBDA_1 * abs(sec["Q"]) / 2.0, sec["tol"], relative=True)
    _write_csv(rep.out_path("scan.csv"), ["k"] + [f"r={r:g}" for r in radii] + ["total", "resolved"], rows)


HANDLERS = {"verify-kernels": cmd_verify_kernels, "verify-bessel": cmd_verify_bessel, "bubble": cmd_bubble,
            "blowup": cmd_blowup, "relation": cmd_relation, "pizzetti": cmd_pizzetti,
            "brezis-merle": cmd_brezis_merle, "scan": cmd_scan}


def run(command: str, config=None, overrides=()) -> tuple:
    """Run one command; returns (exit code, report path or None)."""
    cfg = load_config(command, config, overrides)
    rep = Report(command, cfg)
    HANDLERS[command](rep)
    path = rep.write()
    for c in rep.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: value={c['value']:.6g} "
              f"target={c['target']} tol={c['tolerance']}")
    print(f"report: {path}")
    return (0 if rep.passed else 1), path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fracq", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config leaf by dotted path (repeatable)")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        code, _ = run(args.command, args.config, args.overrides)
    except (ConfigError, DomainError) as exc:
        print(f"fracq: error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
