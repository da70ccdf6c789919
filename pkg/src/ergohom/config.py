"""Experiment configuration: JSON schema version 1, validation and object building.

Unknown keys are errors.  Every diagnostic names the key path at fault.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .fields import EllipticMap, GridSpec
from .gaussian import AtomicSpectrum, Atom, ContinuousCovariance, GaussianFieldModel
from .measure import (ConstantComponent, GaussianRelated, Mixture, PeriodicComponent,
                      ShiftedPeriodicComponent, WEIGHT_TOL)
from .resonance import FrequencySet, kernel_basis, parse_rational

SCHEMA = 1
COMMANDS = ("homogenize", "law", "resonance", "converge", "sample-field")

TOP_KEYS = {"schema", "command", "master_seed", "output_dir", "grid", "solver", "measure",
            "gaussian", "resonance", "samples", "convergence"}
SECTION_KEYS = {
    "grid": {"dim", "cells", "h"},
    "solver": {"tol", "max_iter"},
    "measure": {"kind", "components", "map"},
    "gaussian": {"c0", "atoms", "continuous", "channels"},
    "resonance": {"generators", "frequencies", "generator_values"},
    "convergence": {"eps", "mesh_cells", "domain", "f", "control"},
}
COMPONENT_KEYS = {"weight", "kind", "value", "pattern", "period", "random_phase", "a1", "a2"}
MAP_KEYS = {"kind", "mu", "s", "lambda", "Lambda", "a1", "a2", "threshold", "channels"}
REQUIRED = {
    "homogenize": ("grid", "measure"),
    "law": ("grid", "measure", "samples"),
    "resonance": ("resonance",),
    "converge": ("grid", "measure", "convergence"),
    "sample-field": ("grid", "measure"),
}


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _unknown(section: dict, allowed, path, out):
    for key in sorted(set(section) - set(allowed)):
        out.append(f"{path}{key}: unknown key (allowed: {', '.join(sorted(allowed))})")


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(cfg, command: str | None = None, require_command: bool = True) -> list[str]:
    """Diagnostics for ``cfg``; empty iff :func:`build` would succeed.

    With ``require_command=False`` a config without a command is checked
    section by section only.
    """
    out: list[str] = []
    if not isinstance(cfg, dict):
        return ["<root>: configuration must be a JSON object"]
    _unknown(cfg, TOP_KEYS, "", out)
    if cfg.get("schema") != SCHEMA:
        out.append(f"schema: expected {SCHEMA}, got {cfg.get('schema')!r} (add \"schema\": 1)")
    command = command or cfg.get("command")
    if command is None and not require_command:
        pass
    elif command not in COMMANDS:
        out.append(f"command: {command!r} is not one of {', '.join(COMMANDS)}")
    elif cfg.get("command") not in (None, command):
        out.append(f"command: config says {cfg['command']!r} but {command!r} was requested")
    seed = cfg.get("master_seed")
    if seed is None:
        out.append("master_seed: missing (set a 64-bit unsigned integer; wall-clock seeding is not allowed)")
    elif not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        out.append(f"master_seed: {seed!r} is not a 64-bit unsigned integer")
    for name, keys in SECTION_KEYS.items():
        if name in cfg:
            if not isinstance(cfg[name], dict):
                out.append(f"{name}: must be an object")
            else:
                _unknown(cfg[name], keys, f"{name}.", out)
    if command in REQUIRED:
        for name in REQUIRED[command]:
            if name not in cfg:
                out.append(f"{name}: section required by command {command!r}")
    if out:
        return out
    checks = [("grid", _check_grid), ("solver", _check_solver), ("measure", _check_measure),
              ("gaussian", _check_gaussian), ("resonance", _check_resonance),
              ("convergence", _check_convergence)]
    for name, fn in checks:
        if name in cfg:
            fn(cfg, out)
    if "samples" in cfg and (not isinstance(cfg["samples"], int) or cfg["samples"] < 1):
        out.append(f"samples: must be a positive integer, got {cfg['samples']!r}")
    if not out:
        try:
            build(cfg, command)
        except (ValueError, TypeError, KeyError) as exc:
            out.append(f"{getattr(exc, 'key', '<build>')}: {exc}")
    return out


def _check_grid(cfg, out):
    g = cfg["grid"]
    if g.get("dim") not in (1, 2, 3):
        out.append(f"grid.dim: must be 1, 2 or 3, got {g.get('dim')!r}")
        return
    cells = g.get("cells")
    cells = [cells] if isinstance(cells, int) else cells
    if not isinstance(cells, list) or not all(isinstance(c, int) and c >= 2 for c in cells):
        out.append("grid.cells: need an integer >= 2 or a list of them")
    elif len(cells) not in (1, g["dim"]):
        out.append(f"grid.cells: expected 1 or {g['dim']} entries")
    if "h" in g and not (_is_number(g["h"]) and g["h"] > 0):
        out.append("grid.h: must be a positive number")


def _check_solver(cfg, out):
    s = cfg["solver"]
    if "tol" in s and not (_is_number(s["tol"]) and 0 < s["tol"] < 1):
        out.append("solver.tol: must lie in (0, 1)")
    if "max_iter" in s and not (isinstance(s["max_iter"], int) and s["max_iter"] >= 1):
        out.append("solver.max_iter: must be a positive integer")


def _check_measure(cfg, out):
    m = cfg["measure"]
    kind = m.get("kind")
    if kind == "mixture":
        comps = m.get("components")
        if not isinstance(comps, list) or not comps:
            out.append("measure.components: need a non-empty list")
            return
        weights = []
        for i, c in enumerate(comps):
            path = f"measure.components[{i}]."
            if not isinstance(c, dict):
                out.append(f"{path[:-1]}: must be an object")
                continue
            _unknown(c, COMPONENT_KEYS, path, out)
            w = c.get("weight")
            if not _is_number(w) or not 0 <= w <= 1:
                out.append(f"{path}weight: must be a number in [0, 1]")
            else:
                weights.append(w)
            if c.get("kind") not in ("constant", "periodic", "shifted_periodic", "checkerboard"):
                out.append(f"{path}kind: unknown component kind {c.get('kind')!r}")
        if len(weights) == len(comps) and abs(sum(weights) - 1.0) > WEIGHT_TOL:
            out.append(f"measure.components: weights sum to {sum(weights):.12g} (must sum to 1)")
    elif kind == "gaussian":
        if "gaussian" not in cfg:
            out.append("gaussian: section required by measure.kind 'gaussian'")
        mp = m.get("map")
        if not isinstance(mp, dict):
            out.append("measure.map: elliptic map object required")
        else:
            _unknown(mp, MAP_KEYS, "measure.map.", out)
            if mp.get("kind") not in ("affine_clamped", "logistic", "two_phase"):
                out.append(f"measure.map.kind: unknown map {mp.get('kind')!r}")
    else:
        out.append(f"measure.kind: must be 'mixture' or 'gaussian', got {kind!r}")


def _check_gaussian(cfg, out):
    g = cfg["gaussian"]
    for i, a in enumerate(g.get("atoms", [])):
        if not isinstance(a, dict) or set(a) - {"omega", "c"}:
            out.append(f"gaussian.atoms[{i}]: expected keys omega and c only")
    cont = g.get("continuous", {})
    if not isinstance(cont, dict) or set(cont) - {"kind", "sigma2", "ell"}:
        out.append("gaussian.continuous: expected keys kind, sigma2, ell")


def _check_resonance(cfg, out):
    r = cfg["resonance"]
    gens = r.get("generators")
    if not isinstance(gens, list) or not gens:
        out.append("resonance.generators: need a non-empty list of names")
        return
    for i, f in enumerate(r.get("frequencies", [])):
        if not isinstance(f, dict) or set(f) != {"axis_coeffs"}:
            out.append(f"resonance.frequencies[{i}]: expected a single key axis_coeffs")
            continue
        for a, axis in enumerate(f["axis_coeffs"]):
            for m, q in enumerate(axis):
                try:
                    parse_rational(q)
                except (TypeError, ValueError, ZeroDivisionError) as exc:
                    out.append(f"resonance.frequencies[{i}].axis_coeffs[{a}][{m}]: {exc}")


def _check_convergence(cfg, out):
    c = cfg["convergence"]
    eps = c.get("eps")
    if not isinstance(eps, list) or not eps or not all(_is_number(e) and 0 < e <= 1 for e in eps):
        out.append("convergence.eps: need a list of numbers in (0, 1]")
    elif any(b >= a for a, b in zip(eps, eps[1:])):
        out.append("convergence.eps: list is not strictly decreasing (sort it from coarse to fine)")
    if "mesh_cells" in c and not (isinstance(c["mesh_cells"], int) and c["mesh_cells"] >= 2):
        out.append("convergence.mesh_cells: cells per unit length, integer >= 2")
    if c.get("control", "none") not in ("none", "voigt"):
        out.append("convergence.control: must be 'none' or 'voigt'")


def _keyed(key, fn, *args):
    try:
        return fn(*args)
    except (ValueError, TypeError, KeyError) as exc:
        err = type(exc)(f"{exc}")
        err.key = key
        raise err from exc


def build_grid(cfg) -> GridSpec:
    g = cfg["grid"]
    cells = g["cells"]
    cells = [cells] * g["dim"] if isinstance(cells, int) else list(cells)
    if len(cells) == 1:
        cells = cells * g["dim"]
    h = g.get("h", 1.0 / cells[0])
    return _keyed("grid", GridSpec, g["dim"], tuple(cells), float(h), True)


def build_map(mp) -> EllipticMap:
    kind = mp["kind"]
    ch = mp.get("channels", 1)
    if kind == "affine_clamped":
        return EllipticMap.affine_clamped(mp["mu"], mp["s"], mp["lambda"], mp["Lambda"], ch)
    if kind == "logistic":
        return EllipticMap.logistic(mp["lambda"], mp["Lambda"], ch)
    return EllipticMap.two_phase(mp["a1"], mp["a2"], mp.get("threshold", 0.0), ch)


def build_frequencies(cfg) -> FrequencySet:
    r = cfg["resonance"]
    return FrequencySet(tuple(r["generators"]),
                        tuple(tuple(tuple(axis) for axis in f["axis_coeffs"]) for f in r["frequencies"]))


def build_model(cfg) -> GaussianFieldModel:
    g = cfg["gaussian"]
    atoms = tuple(Atom(tuple(float(w) for w in a["omega"]), float(a["c"])) for a in g.get("atoms", []))
    cont = g.get("continuous", {"kind": "none"})
    cov = ContinuousCovariance(cont.get("kind", "none"), float(cont.get("sigma2", 0.0)), float(cont.get("ell", 1.0)))
    return GaussianFieldModel(cov, AtomicSpectrum(float(g.get("c0", 0.0)), atoms), int(g.get("channels", 1)))


def _component(c):
    kind = c["kind"]
    if kind == "constant":
        return ConstantComponent(c["value"])
    if kind == "checkerboard":
        a1, a2 = c["a1"], c["a2"]
        return PeriodicComponent([[a1, a2], [a2, a1]], c.get("period", 1.0))
    if kind == "periodic":
        return PeriodicComponent(c["pattern"], c.get("period", 1.0))
    return ShiftedPeriodicComponent(c["pattern"], c.get("period", 1.0), c.get("random_phase", True))


def build_measure(cfg):
    m = cfg["measure"]
    if m["kind"] == "mixture":
        comps = tuple((c["weight"], _keyed(f"measure.components[{i}]", _component, c))
                      for i, c in enumerate(m["components"]))
        return _keyed("measure.components", Mixture, comps)
    model = _keyed("gaussian", build_model, cfg)
    F = _keyed("measure.map", build_map, m["map"])
    lattice = None
    if "resonance" in cfg:
        freqs = _keyed("resonance", build_frequencies, cfg)
        if freqs.N != model.atomic.N:
            raise _with_key(ValueError(f"resonance lists {freqs.N} frequencies, gaussian.atoms has {model.atomic.N}"),
                            "resonance.frequencies")
        values = cfg["resonance"].get("generator_values")
        if values is not None:
            omegas = freqs.evaluate(values)
            if omegas.shape != model.atomic.omegas.shape or not np.allclose(omegas, model.atomic.omegas,
                                                                           rtol=1e-12, atol=1e-12):
                raise _with_key(ValueError("declared rational frequencies disagree with gaussian.atoms omegas"),
                                "resonance.generator_values")
        lattice = kernel_basis(freqs)
    elif model.atomic.N > 1:
        raise _with_key(ValueError("more than one atom needs a resonance section to fix the lattice"),
                        "resonance")
    return _keyed("measure", GaussianRelated, model, F, lattice)


def _with_key(exc, key):
    exc.key = key
    return exc


def build(cfg, command=None) -> dict:
    command = command or cfg.get("command")
    out = {"command": command}
    if "grid" in cfg:
        out["grid"] = build_grid(cfg)
    if "measure" in cfg:
        out["measure"] = build_measure(cfg)
    if "resonance" in cfg:
        out["frequencies"] = _keyed("resonance", build_frequencies, cfg)
    s = cfg.get("solver", {})
    out["tol"] = float(s.get("tol", 1e-9))
    out["max_iter"] = int(s.get("max_iter", 10_000))
    return out
