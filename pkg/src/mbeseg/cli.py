"""Command-line front end: INI run configs, artifact emission, experiment suites.

Verbs::

    mbeseg run CONFIG [-o DIR] [--seed N] [--emit LIST] [--tol X] [--quiet]
    mbeseg fixture SPEC -o DIR [--seed N]
    mbeseg suite NAME -o DIR [--jobs N] [--iter-max N] [--quiet]
    mbeseg metrics MASK_A MASK_B

Exit codes: 0 success, 1 suite check failed, 2 config error,
3 numerical divergence, 4 I/O error.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import configparser
from dataclasses import dataclass, replace
import hashlib
import json
import math
from pathlib import Path
import re
import sys
import time

import numpy as np
from PIL import Image, ImageDraw

from . import bench
from .bench import Bias, FixtureSpec
from .errors import (ConfigError, DivergenceError, ImageFormatError, MbesegError,
                     NonPositiveEnergyError)
from .images import load_image, save_image, to_uint8
from .levelset import DiracSpec, Disk, InitSpec, MaskShape, Rectangle
from .model import GAC, RSF, ModelSpec, Regularizer
from .solver import run as run_model

EMIT_KINDS = ("mask", "contour_overlay", "gradmap", "trace", "final_phi")

EXIT_OK, EXIT_SUITE, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3, 4


# --- config schema ----------------------------------------------------------------
#
# Each key maps to (kind, default, constraint, help). ``kind`` is one of
# float, int, str, path, choice tuple or "emit". Constraints: "pos" (> 0),
# "nonneg" (>= 0) or None.

_OPT = "none"

SCHEMA = {
    "input": {
        "image": ("path", None, None, "grayscale PNG/PGM to segment; omit to use [fixture]"),
    },
    "fixture": {
        "kind": (bench.KINDS, "ring", None, "synthetic image family"),
        "width": ("int", 128, "pos", "grid width M"),
        "height": ("int", 128, "pos", "grid height N"),
        "noise_std": ("float", 0.0, "nonneg", "Gaussian noise std on the 0-255 scale"),
        "seed": ("int", 0, "nonneg", "noise seed"),
        "bias": (("none", "linear", "radial_gaussian"), "none", None, "additive bias field"),
        "bias_gain": ("float", 0.0, None, "linear bias: left-to-right swing"),
        "bias_sigma": ("float", 0.0, "nonneg", "radial bias width"),
        "bias_amplitude": ("float", 0.0, None, "radial bias peak"),
        "inner_radius": ("float", 18.0, "nonneg", "ring inner radius"),
        "outer_radius": ("float", 34.0, "pos", "ring outer radius"),
        "blur": ("float", 3.0, "nonneg", "blurred_boundary edge width"),
        "foreground": ("float", 170.0, None, "object intensity"),
        "background": ("float", 85.0, None, "background intensity"),
    },
    "init": {
        "shape": (("rectangle", "disk", "mask"), "rectangle", None, "initial region"),
        "x0": ("float", None, None, "rectangle left (default M/8)"),
        "y0": ("float", None, None, "rectangle top (default N/8)"),
        "x1": ("float", None, None, "rectangle right (default 7M/8)"),
        "y1": ("float", None, None, "rectangle bottom (default 7N/8)"),
        "cx": ("float", None, None, "disk centre x (default grid centre)"),
        "cy": ("float", None, None, "disk centre y (default grid centre)"),
        "radius": ("float", None, "pos", "disk radius (default min(M, N)/3)"),
        "path": ("path", None, None, "mask image, nonzero = interior"),
        "mode": (("binary_step", "signed_distance"), "binary_step", None, "initial profile"),
        "c": ("float", 2.0, "pos", "binary step magnitude"),
    },
    "model": {
        "fidelity": (("rsf", "gac"), "rsf", None, "data term"),
        "regularizer": (("mbe", "dr1", "dr2"), "mbe", None, "level-set regularizer"),
        "mu": ("float", 1.0, "nonneg", "regularizer weight"),
        "alpha": ("float", 15.0, "pos", "biharmonic weight (MBE only)"),
        "solver": (("sav", "fdm"), "sav", None, "time stepper"),
        "tau": ("float", 0.01, "pos", "time step"),
        "iter_max": ("int", 1000, "nonneg", "number of steps"),
        "tol": ("float?", None, "pos", "stop when max|dphi|/tau < tol ('none' disables)"),
        "c0": ("float", 1.0, None, "constant added to E1"),
        "length_form": (("variational", "curvature"), "variational", None,
                        "discretisation of length forces"),
    },
    "rsf": {
        "lambda1": ("float", 0.67, "pos", "weight of the interior (phi > 0) fit"),
        "lambda2": ("float", 0.33, "pos", "weight of the exterior fit"),
        "sigma": ("float", 5.0, "pos", "fitting kernel width"),
        "nu": ("float", 10.0, "nonneg", "arc-length weight"),
    },
    "gac": {
        "lam": ("float", 1.0, "pos", "edge-weighted length weight"),
        "gamma": ("float", 1.0, None, "balloon weight"),
        "sigma_edge": ("float", 1.5, "pos", "pre-smoothing for the edge indicator"),
    },
    "dirac": {
        "variant": (("rational", "compact"), "rational", None, "smoothed delta"),
        "epsilon": ("float", 1.0, "pos", "delta width"),
    },
    "output": {
        "dir": ("path_out", "out", None, "artifact directory"),
        "emit": ("emit", ",".join(EMIT_KINDS), None, "artifacts to write"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    input_image: object          # absolute path string, or None
    fixture: object              # FixtureSpec, or None
    init: InitSpec
    model: ModelSpec
    output_dir: str
    emit: tuple

    @property
    def grid_shape(self):
        if self.fixture is not None:
            return self.fixture.grid_shape
        with Image.open(self.input_image) as im:
            return (im.height, im.width)


def _key_lines(text):
    """Map ``(section, key)`` to 1-based line numbers."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, None)] = no
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


class _Reader:
    def __init__(self, parser, lines, source, base):
        self.parser = parser
        self.lines = lines
        self.source = source
        self.base = base

    def where(self, section, key):
        no = self.lines.get((section, key))
        loc = f"{self.source}:{no}" if no else self.source
        return f"{loc}: [{section}] {key}"

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: {msg}")

    def has(self, section):
        return self.parser.has_section(section)

    def get(self, section, key):
        kind, default, constraint, _ = SCHEMA[section][key]
        if not (self.parser.has_section(section) and self.parser.has_option(section, key)):
            if kind not in ("emit", "path_out"):
                return default
            raw = default
        else:
            raw = self.parser.get(section, key).strip()
        if isinstance(kind, tuple):
            if raw not in kind:
                self.fail(section, key, f"expected one of {', '.join(kind)}, got {raw!r}")
            return raw
        if kind == "float?" and raw.lower() == _OPT:
            return None
        if kind in ("float", "float?"):
            try:
                value = float(raw)
            except ValueError:
                self.fail(section, key, f"expected a number, got {raw!r}")
            if not math.isfinite(value):
                self.fail(section, key, f"expected a finite number, got {raw!r}")
        elif kind == "int":
            try:
                value = int(raw)
            except ValueError:
                self.fail(section, key, f"expected an integer, got {raw!r}")
        elif kind in ("path", "path_out"):
            p = Path(raw).expanduser()
            if not p.is_absolute():
                p = self.base / p
            p = p.resolve()
            if kind == "path" and not p.exists():
                self.fail(section, key, f"file not found: {p}")
            return str(p)
        elif kind == "emit":
            items = tuple(sorted({s.strip() for s in raw.split(",") if s.strip()}))
            bad = [s for s in items if s not in EMIT_KINDS]
            if bad:
                self.fail(section, key, f"unknown artifact {bad[0]!r}; choose from {', '.join(EMIT_KINDS)}")
            return items
        else:
            return raw
        if constraint == "pos" and not value > 0:
            self.fail(section, key, f"must be > 0, got {raw}")
        if constraint == "nonneg" and not value >= 0:
            self.fail(section, key, f"must be >= 0, got {raw}")
        return value


def _read_parser(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: [{exc.section}] {exc.option}: duplicate key") from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: duplicate section [{exc.section}]") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    lines = _key_lines(text)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}:{lines.get((section.lower(), None), '?')}: unknown section [{section}]")
        for key in parser.options(section):
            if key not in SCHEMA[section]:
                no = lines.get((section, key), "?")
                raise ConfigError(f"{path}:{no}: [{section}] {key}: unknown key")
    return _Reader(parser, lines, str(path), path.resolve().parent)


def _fixture_from(r):
    g = lambda k: r.get("fixture", k)  # noqa: E731
    bias = Bias(g("bias"), g("bias_gain"), g("bias_sigma"), g("bias_amplitude"))
    if bias.kind == "radial_gaussian" and not bias.sigma_b > 0:
        r.fail("fixture", "bias_sigma", "radial_gaussian bias needs bias_sigma > 0")
    if g("kind") == "ring" and not g("inner_radius") < g("outer_radius"):
        r.fail("fixture", "inner_radius", "must be smaller than outer_radius")
    spec = FixtureSpec(kind=g("kind"), size=(g("width"), g("height")), bias=bias,
                       noise_std=g("noise_std"), seed=g("seed"),
                       inner_radius=g("inner_radius"), outer_radius=g("outer_radius"),
                       blur=g("blur"), foreground=g("foreground"), background=g("background"))
    try:
        bench.truth_mask(spec)
    except MbesegError as exc:
        r.fail("fixture", "kind", str(exc))
    return spec


def _init_from(r, grid_shape):
    rows, cols = grid_shape
    g = lambda k: r.get("init", k)  # noqa: E731
    shape_kind = g("shape")
    if shape_kind == "rectangle":
        dflt = {"x0": cols / 8.0, "y0": rows / 8.0, "x1": 7.0 * cols / 8.0, "y1": 7.0 * rows / 8.0}
        vals = {k: (g(k) if g(k) is not None else dflt[k]) for k in dflt}
        shape = Rectangle(**vals)
        if not (0 <= shape.x0 <= shape.x1 <= cols - 1 and 0 <= shape.y0 <= shape.y1 <= rows - 1):
            r.fail("init", "shape", f"{shape} lies outside the {cols}x{rows} grid")
    elif shape_kind == "disk":
        cx = g("cx") if g("cx") is not None else (cols - 1) / 2.0
        cy = g("cy") if g("cy") is not None else (rows - 1) / 2.0
        rad = g("radius") if g("radius") is not None else min(rows, cols) / 3.0
        shape = Disk(cx, cy, rad)
        if cx - rad < 0 or cy - rad < 0 or cx + rad > cols - 1 or cy + rad > rows - 1:
            r.fail("init", "radius", f"{shape} lies outside the {cols}x{rows} grid")
    else:
        if g("path") is None:
            r.fail("init", "path", "shape = mask needs a path")
        shape = MaskShape(g("path"))
    return InitSpec(shape, g("mode"), g("c"))


def _model_from(r):
    g = lambda k: r.get("model", k)  # noqa: E731
    if g("fidelity") == "rsf":
        fid = RSF(r.get("rsf", "lambda1"), r.get("rsf", "lambda2"),
                  r.get("rsf", "sigma"), r.get("rsf", "nu"))
    else:
        fid = GAC(r.get("gac", "lam"), r.get("gac", "gamma"), r.get("gac", "sigma_edge"))
    reg = Regularizer(g("regularizer"), g("mu"), g("alpha"))
    dirac = DiracSpec(r.get("dirac", "variant"), r.get("dirac", "epsilon"))
    if g("solver") == "fdm" and reg.kind == "mbe" and not g("tau") * g("mu") < 3.0 * g("alpha"):
        r.fail("model", "tau", "fdm needs tau * mu < 3 * alpha")
    return ModelSpec(fidelity=fid, regularizer=reg, dirac=dirac, solver=g("solver"),
                     tau=g("tau"), iter_max=g("iter_max"), tol=g("tol"), c0=g("c0"),
                     length_form=g("length_form"))


def parse_config(path):
    """Read and fully validate a run config; see :data:`SCHEMA` for keys."""
    r = _read_parser(path)
    image = r.get("input", "image")
    if image is not None and r.has("fixture"):
        r.fail("input", "image", "give either [input] image or a [fixture] section, not both")
    if image is None and not r.has("fixture"):
        raise ConfigError(f"{path}: no input; set [input] image or add a [fixture] section")
    if image is not None:
        try:
            with Image.open(image) as im:
                grid = (im.height, im.width)
        except OSError as exc:
            r.fail("input", "image", f"cannot open image ({exc})")
        fixture = None
    else:
        fixture = _fixture_from(r)
        grid = fixture.grid_shape
    try:
        init = _init_from(r, grid)
        model = _model_from(r)
    except MbesegError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig(image, fixture, init, model, r.get("output", "dir"), r.get("output", "emit"))


def parse_fixture(path):
    """Read a file holding only a ``[fixture]`` section."""
    r = _read_parser(path)
    if not r.has("fixture"):
        raise ConfigError(f"{path}: no [fixture] section")
    return _fixture_from(r)


def _fmt(v):
    if v is None:
        return _OPT
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(v)
    return str(v)


def _fixture_items(f):
    return [("kind", f.kind), ("width", f.size[0]), ("height", f.size[1]),
            ("noise_std", float(f.noise_std)), ("seed", int(f.seed)), ("bias", f.bias.kind),
            ("bias_gain", float(f.bias.gain)), ("bias_sigma", float(f.bias.sigma_b)),
            ("bias_amplitude", float(f.bias.amplitude)),
            ("inner_radius", float(f.inner_radius)), ("outer_radius", float(f.outer_radius)),
            ("blur", float(f.blur)), ("foreground", float(f.foreground)),
            ("background", float(f.background))]


def dump_config(cfg):
    """Resolved config as INI text; every key explicit, ``parse_config`` reads it back."""
    sections = []
    if cfg.input_image is not None:
        sections.append(("input", [("image", cfg.input_image)]))
    else:
        sections.append(("fixture", _fixture_items(cfg.fixture)))
    s = cfg.init.shape
    if isinstance(s, Rectangle):
        shape = [("shape", "rectangle"), ("x0", float(s.x0)), ("y0", float(s.y0)),
                 ("x1", float(s.x1)), ("y1", float(s.y1))]
    elif isinstance(s, Disk):
        shape = [("shape", "disk"), ("cx", float(s.cx)), ("cy", float(s.cy)),
                 ("radius", float(s.radius))]
    else:
        shape = [("shape", "mask"), ("path", s.path)]
    sections.append(("init", shape + [("mode", cfg.init.mode), ("c", float(cfg.init.c))]))
    m = cfg.model
    fid = m.fidelity
    sections.append(("model", [
        ("fidelity", "rsf" if isinstance(fid, RSF) else "gac"),
        ("regularizer", m.regularizer.kind), ("mu", float(m.regularizer.mu)),
        ("alpha", float(m.regularizer.alpha)), ("solver", m.solver), ("tau", float(m.tau)),
        ("iter_max", int(m.iter_max)), ("tol", None if m.tol is None else float(m.tol)),
        ("c0", float(m.c0)), ("length_form", m.length_form)]))
    if isinstance(fid, RSF):
        sections.append(("rsf", [("lambda1", float(fid.lambda1)), ("lambda2", float(fid.lambda2)),
                                 ("sigma", float(fid.sigma)), ("nu", float(fid.nu))]))
    else:
        sections.append(("gac", [("lam", float(fid.lam)), ("gamma", float(fid.gamma)),
                                 ("sigma_edge", float(fid.sigma_edge))]))
    sections.append(("dirac", [("variant", m.dirac.variant), ("epsilon", float(m.dirac.epsilon))]))
    sections.append(("output", [("dir", cfg.output_dir), ("emit", cfg.emit)]))
    out = []
    for name, items in sections:
        out.append(f"[{name}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in items)
        out.append("")
    return "\n".join(out)


def describe_schema():
    """Plain-text table of every key and its default."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (kind, default, _, doc) in keys.items():
            out.append(f"  {key:15s} default {_fmt(default):28s} {doc}")
    return "\n".join(out)


# --- running and artifacts ----------------------------------------------------

def load_input(cfg):
    """``(image, truth)``; ``truth`` is None for file inputs."""
    if cfg.fixture is not None:
        return bench.generate(cfg.fixture)
    return load_image(cfg.input_image), None


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def draw_overlay(image, contours, colour=(255, 0, 0)):
    """RGB rendering of ``image`` with each polyline drawn on top."""
    gray = to_uint8(image)
    canvas = Image.fromarray(np.stack([gray] * 3, axis=-1), mode="RGB")
    draw = ImageDraw.Draw(canvas)
    for line in contours:
        pts = [(float(x), float(y)) for x, y in line]
        if len(pts) >= 2:
            draw.line(pts, fill=colour, width=1)
    return canvas


def write_polylines(path, contours):
    """One ``x y`` pair per line, a blank line between polylines."""
    blocks = ["\n".join(f"{x:.17g} {y:.17g}" for x, y in line) for line in contours]
    Path(path).write_text("\n\n".join(blocks) + ("\n" if blocks else ""))


def read_polylines(path):
    text = Path(path).read_text().strip()
    if not text:
        return []
    return [np.array([[float(t) for t in row.split()] for row in block.splitlines()])
            for block in text.split("\n\n")]


def emit_artifacts(result, trace, cfg, image, out_dir=None):
    """Write the selected artifacts plus ``config.ini`` and ``manifest.json``.

    ``result`` may be None after a failed run; then only the partial trace is
    written. Returns the manifest dict.
    """
    out = Path(out_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {}

    def put(name, what):
        files[name] = what

    if trace is not None and "trace" in cfg.emit:
        trace.to_csv(out / "trace.csv")
        put("trace.csv", "energy trace (iter,E_mod,E1,r,grad_max,grad_mean)")
    if result is not None:
        if "mask" in cfg.emit:
            save_image(out / "mask.png", np.where(result.mask, 255.0, 0.0))
            put("mask.png", "segmentation mask, 255 = interior")
        if "gradmap" in cfg.emit:
            hi = float(result.gradmap.max())
            Image.fromarray(to_uint8(result.gradmap, 0.0, hi), mode="L").save(out / "gradmap.png")
            (out / "gradmap.json").write_text(json.dumps(
                {"lo": 0.0, "hi": hi, "note": "|grad phi| = lo + (hi - lo) * png / 255"},
                indent=2, sort_keys=True) + "\n")
            put("gradmap.png", "|grad phi| map, linearly scaled")
            put("gradmap.json", "scale bounds for gradmap.png")
        if "contour_overlay" in cfg.emit:
            draw_overlay(image, result.contours).save(out / "overlay.png")
            write_polylines(out / "contours.txt", result.contours)
            put("overlay.png", "zero contour drawn over the input")
            put("contours.txt", "zero contour polylines, x y per line")
        if "final_phi" in cfg.emit:
            np.save(out / "final_phi.npy", result.phi)
            put("final_phi.npy", "final level set (float64)")
    (out / "config.ini").write_text(dump_config(cfg))
    put("config.ini", "resolved configuration")
    manifest = {
        "files": {name: {"description": desc, "sha256": _sha256(out / name)}
                  for name, desc in sorted(files.items())},
        "iterations": None if result is None else result.iterations,
        "converged": None if result is None else result.converged,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def execute(cfg, out_dir=None):
    """Run one config and emit its artifacts; returns ``(result, trace, truth)``.

    On divergence the partial trace is written before the error propagates.
    """
    image, truth = load_input(cfg)
    try:
        result, trace = run_model(cfg.model, image, cfg.init)
    except DivergenceError as exc:
        emit_artifacts(None, exc.trace, cfg, image, out_dir)
        raise
    emit_artifacts(result, trace, cfg, image, out_dir)
    return result, trace, truth


# --- experiment suites ------------------------------------------------------------

SUITES = ("init_independence", "smoothness_sweep", "noise_sweep", "sav_stability")


def _cfg(fixture, init, model, emit=EMIT_KINDS):
    return RunConfig(None, fixture, init, model, "", tuple(sorted(emit)))


def _rsf_model(reg, l_in, l_out, sigma, nu, tau, iters, solver="sav"):
    return ModelSpec(fidelity=RSF(l_in, l_out, sigma, nu), regularizer=reg,
                     solver=solver, tau=tau, iter_max=iters)


def suite_members(name):
    """Ordered ``[(member_name, RunConfig)]`` for a suite.

    Table weights are transcribed with the background weight on ``lambda2``
    (exterior) and the object weight on ``lambda1`` (interior, phi > 0).
    """
    members = []
    if name == "init_independence":
        fx = FixtureSpec(kind="two_shapes", noise_std=10.0, seed=1)
        for reg_name, reg in (("mbe", Regularizer("mbe", 1.0, 15.0)), ("dr1", Regularizer("dr1", 1.0))):
            for mode in ("binary_step", "signed_distance"):
                init = InitSpec(Rectangle(10, 10, 117, 117), mode=mode)
                model = _rsf_model(reg, 0.67, 0.33, 3.0, 10.0, 0.01, 5000)
                members.append((f"{reg_name}_{mode}", _cfg(fx, init, model)))
    elif name == "smoothness_sweep":
        # blurred edge, curvature rows and weak length rows
        blur = FixtureSpec(kind="blurred_boundary")
        init = InitSpec(Rectangle(24, 24, 103, 103))
        rows = [(1, 2, 1, 50, 0, 0.01, 3000), (1, 2, 1, 100, 0, 0.01, 3000),
                (1, 2, 1, 200, 0, 0.01, 3000), (1, 3, 1, 1, 10, 0.01, 10000),
                (1, 3, 1, 5, 10, 0.01, 10000), (1, 3, 1, 20, 10, 0.01, 10000)]
        for k, (l1, l2, mu, alpha, nu, tau, it) in enumerate(rows, 1):
            model = _rsf_model(Regularizer("mbe", mu, alpha), l2, l1, 3.0, nu, tau, it)
            members.append((f"blur_{k}", _cfg(blur, init, model)))
        star = FixtureSpec(kind="star_corners", noise_std=5.0, seed=2,
                           bias=Bias("linear", gain=30.0))
        init = InitSpec(Rectangle(12, 12, 115, 115))
        rows = [(1, 1, 0), (1, 1, 10), (1, 10, 10), (1, 100, 0), (1, 100, 10), (1, 1, 500)]
        for k, (mu, alpha, nu) in enumerate(rows, 1):
            model = _rsf_model(Regularizer("mbe", mu, alpha), 0.67, 0.33, 3.0, nu, 0.01, 2000)
            members.append((f"star_{k}", _cfg(star, init, model)))
        shapes = FixtureSpec(kind="two_shapes", noise_std=5.0, seed=3,
                             bias=Bias("radial_gaussian", sigma_b=40.0, amplitude=40.0))
        init = InitSpec(Rectangle(10, 10, 117, 117))
        rows = [(1, 10, 0), (1, 30, 100), (1, 200, 0), (1, 10, 1000), (1, 100, 100), (1, 200, 100)]
        for k, (mu, alpha, nu) in enumerate(rows, 1):
            model = _rsf_model(Regularizer("mbe", mu, alpha), 3.5, 1.0, 3.0, nu, 0.01, 600)
            members.append((f"shapes_{k}", _cfg(shapes, init, model)))
    elif name == "noise_sweep":
        init = InitSpec(Rectangle(20, 20, 107, 107))
        ring10 = FixtureSpec(kind="ring", noise_std=10.0)
        for k, (mu, alpha, nu) in enumerate([(1, 15, 10), (1, 15, 20), (1, 20, 0)], 1):
            model = _rsf_model(Regularizer("mbe", mu, alpha), 0.67, 0.33, 5.0, nu, 0.01, 4000)
            members.append((f"std10_mbe_{k}", _cfg(ring10, init, model)))
        for k, (mu, nu, tau, it) in enumerate([(6.6, 20, 0.015, 2000), (6.6, 100, 0.015, 2000),
                                               (8, 150, 0.013, 4000)], 1):
            model = _rsf_model(Regularizer("dr2", mu), 0.67, 0.33, 5.0, nu, tau, it, "fdm")
            members.append((f"std10_dr2_{k}", _cfg(ring10, init, model)))
        ring15 = FixtureSpec(kind="ring", noise_std=15.0)
        for k, alpha in enumerate([10, 20, 30], 1):
            model = _rsf_model(Regularizer("mbe", 10, alpha), 0.6, 0.4, 6.0, 0, 0.001, 20000)
            members.append((f"std15_mbe_{k}", _cfg(ring15, init, model)))
        for k, (mu, nu, tau, it) in enumerate([(7, 1, 0.012, 8000), (200, 1, 0.0005, 30000),
                                               (50, 100, 0.002, 10000)], 1):
            model = _rsf_model(Regularizer("dr2", mu), 0.6, 0.4, 6.0, nu, tau, it, "fdm")
            members.append((f"std15_dr2_{k}", _cfg(ring15, init, model)))
    elif name == "sav_stability":
        fx = FixtureSpec(kind="ring", noise_std=10.0,
                         bias=Bias("radial_gaussian", sigma_b=50.0, amplitude=30.0))
        init = InitSpec(Rectangle(20, 20, 107, 107))
        for tau in (0.01, 0.1, 0.5, 1.0):
            model = _rsf_model(Regularizer("mbe", 1.0, 15.0), 0.67, 0.33, 5.0, 10.0, tau, 1000)
            members.append((f"tau_{tau:g}", _cfg(fx, init, model)))
    else:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return members


def _run_member(args):
    name, cfg, out_dir = args
    t0 = time.perf_counter()
    try:
        result, trace, truth = execute(cfg, out_dir)
    except (DivergenceError, NonPositiveEnergyError) as exc:
        return {"member": name, "status": f"failed: {exc}", "divergence": True}
    except (MbesegError, OSError) as exc:
        return {"member": name, "status": f"failed: {exc}", "divergence": False}
    return {
        "member": name,
        "status": "ok",
        "dice": None if truth is None else bench.dice(result.mask, truth > 0.5),
        "grad_max": float(result.gradmap.max()),
        "monotone": trace.is_monotone() if cfg.model.solver == "sav" else None,
        "wall_time": time.perf_counter() - t0,
    }


@dataclass
class SuiteReport:
    name: str
    rows: list
    checks: list         # (description, passed)

    @property
    def ok(self):
        return all(r["status"] == "ok" for r in self.rows) and all(p for _, p in self.checks)

    def table(self):
        head = f"{'member':24s} {'status':8s} {'dice':>8s} {'grad_max':>9s} {'monotone':>9s} {'time_s':>8s}"
        out = [head]
        for r in self.rows:
            if r["status"] != "ok":
                out.append(f"{r['member']:24s} {r['status']}")
                continue
            d = "-" if r["dice"] is None else f"{r['dice']:.4f}"
            mono = "-" if r["monotone"] is None else ("yes" if r["monotone"] else "NO")
            out.append(f"{r['member']:24s} {'ok':8s} {d:>8s} {r['grad_max']:9.3f} {mono:>9s} "
                       f"{r['wall_time']:8.1f}")
        for desc, passed in self.checks:
            out.append(f"{'PASS' if passed else 'FAIL'}  {desc}")
        return "\n".join(out)


def _suite_checks(name, rows, out_root):
    by = {r["member"]: r for r in rows if r["status"] == "ok"}
    checks = []
    if name == "init_independence":
        a = out_root / "mbe_binary_step" / "mask.png"
        b = out_root / "mbe_signed_distance" / "mask.png"
        if a.exists() and b.exists():
            d = bench.dice(load_image(a) > 0, load_image(b) > 0)
            checks.append((f"mbe binary vs signed-distance dice {d:.4f} >= 0.99", d >= 0.99))
    elif name == "sav_stability":
        for m, r in sorted(by.items()):
            checks.append((f"{m} modified energy non-increasing", bool(r["monotone"])))
    elif name == "noise_sweep" and "std10_mbe_1" in by:
        d = by["std10_mbe_1"]["dice"]
        checks.append((f"std10_mbe_1 dice {d:.4f} >= 0.95", d >= 0.95))
        if "std10_dr2_1" in by:
            d2 = by["std10_dr2_1"]["dice"]
            checks.append((f"std10_dr2_1 dice {d2:.4f} < std10_mbe_1", d2 < d))
    return checks


def repro_suite(name, out_dir, jobs=1, iter_max=None, quiet=True):
    """Run every member of suite ``name`` under ``out_dir/<member>``.

    ``iter_max`` overrides the transcribed iteration counts (for smoke runs).
    Writes ``summary.txt`` and ``summary.json`` and returns a :class:`SuiteReport`.
    """
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    members = suite_members(name)
    tasks = []
    for mname, cfg in members:
        model = cfg.model if iter_max is None else replace(cfg.model, iter_max=int(iter_max))
        sub = out_root / mname
        cfg = replace(cfg, model=model, output_dir=str(sub.resolve()))
        tasks.append((mname, cfg, str(sub)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_member, tasks))
    else:
        rows = [_run_member(t) for t in tasks]
    report = SuiteReport(name, rows, _suite_checks(name, rows, out_root))
    (out_root / "summary.txt").write_text(report.table() + "\n")
    (out_root / "summary.json").write_text(json.dumps(
        {"suite": name, "ok": report.ok, "members": rows,
         "checks": [{"check": d, "passed": p} for d, p in report.checks]},
        indent=2, sort_keys=True) + "\n")
    if not quiet:
        print(report.table())
    return report


# --- command line -----------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="mbeseg", description="Level-set segmentation with MBE regularization.")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="segment one image or fixture from an INI config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override [output] dir")
    r.add_argument("--seed", type=int, help="override the fixture noise seed")
    r.add_argument("--emit", help="comma-separated artifacts: " + ",".join(EMIT_KINDS))
    r.add_argument("--tol", type=float, help="stop when max|dphi|/tau falls below this")
    r.add_argument("--quiet", action="store_true")
    r.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    f = sub.add_parser("fixture", help="write a synthetic fixture (16-bit PNG, truth mask, sidecar)")
    f.add_argument("spec", help="INI file with a [fixture] section")
    f.add_argument("-o", "--output", required=True)
    f.add_argument("--seed", type=int)
    f.add_argument("--quiet", action="store_true")

    s = sub.add_parser("suite", help="run a reproduction suite")
    s.add_argument("name", choices=SUITES)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--iter-max", type=int, help="override every member's iteration count")
    s.add_argument("--quiet", action="store_true")

    m = sub.add_parser("metrics", help="Dice and IoU of two mask images (nonzero = interior)")
    m.add_argument("mask_a")
    m.add_argument("mask_b")

    sub.add_parser("keys", help="list config keys and defaults")
    return p


def _say(quiet, *msg):
    if not quiet:
        print(*msg)


def _cmd_run(a):
    cfg = parse_config(a.config)
    if a.seed is not None:
        if cfg.fixture is None:
            raise ConfigError("--seed applies to fixture inputs only")
        cfg = replace(cfg, fixture=replace(cfg.fixture, seed=a.seed))
    if a.emit is not None:
        items = tuple(sorted({s.strip() for s in a.emit.split(",") if s.strip()}))
        bad = [s for s in items if s not in EMIT_KINDS]
        if bad:
            raise ConfigError(f"--emit: unknown artifact {bad[0]!r}")
        cfg = replace(cfg, emit=items)
    if a.tol is not None:
        if not a.tol > 0:
            raise ConfigError("--tol must be > 0")
        cfg = replace(cfg, model=replace(cfg.model, tol=a.tol))
    if a.output is not None:
        cfg = replace(cfg, output_dir=str(Path(a.output).resolve()))
    if a.print_config:
        print(dump_config(cfg), end="")
        return EXIT_OK
    result, trace, truth = execute(cfg)
    _say(a.quiet, f"iterations {result.iterations}  converged {result.converged}  "
                  f"max|grad phi| {result.gradmap.max():.4f}  time {result.wall_time:.2f}s")
    if truth is not None:
        _say(a.quiet, f"dice {bench.dice(result.mask, truth > 0.5):.6f}")
    _say(a.quiet, f"artifacts in {cfg.output_dir}")
    return EXIT_OK


def _cmd_fixture(a):
    spec = parse_fixture(a.spec)
    if a.seed is not None:
        spec = replace(spec, seed=a.seed)
    path = bench.export_fixture(spec, a.output)
    _say(a.quiet, f"wrote {path}")
    return EXIT_OK


def _cmd_suite(a):
    if a.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    report = repro_suite(a.name, a.output, jobs=a.jobs, iter_max=a.iter_max, quiet=a.quiet)
    if any(r.get("divergence") for r in report.rows):
        return EXIT_DIVERGENCE
    return EXIT_OK if report.ok else EXIT_SUITE


def _cmd_metrics(a):
    ma = load_image(a.mask_a) != 0
    mb = load_image(a.mask_b) != 0
    print(f"dice {bench.dice(ma, mb):.6f}")
    print(f"iou {bench.iou(ma, mb):.6f}")
    return EXIT_OK


def main(argv=None):
    a = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "fixture": _cmd_fixture, "suite": _cmd_suite,
                "metrics": _cmd_metrics}
    try:
        if a.verb == "keys":
            print(describe_schema())
            return EXIT_OK
        return handlers[a.verb](a)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, NonPositiveEnergyError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, ImageFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MbesegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
