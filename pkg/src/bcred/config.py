"""Flat ``section.key = value`` experiment configs and the experiment runner.

A config is plain text, one ``section.key = value`` per line, with ``#``
or ``;`` comments.  Booleans are ``true``/``false``.  Keys starting with
``result.`` are ignored on input so that a summary file, which embeds the
fully resolved config followed by its results, can be run again directly.
Relative paths are resolved against the directory of the config file.
"""

import configparser
import math
import os
from dataclasses import dataclass

import numpy as np

from .blocks import make_partition
from .denoisers import (GradientStep, Identity, LinearSmoother, SoftThreshold,
                        TV1DProx, TV2DProx, check_block_nonexpansive,
                        red_objective_linear, tv2d_prox, tv2d_value)
from .exceptions import ConfigError
from .forward import build_forward_model, estimate_lipschitz, radial_mask, random_mask
from .io import (format_float, read_pgm, read_vector_csv, write_matrix_file,
                 write_pgm, write_vector_csv)
from .metrics import add_noise_at_input_snr, snr_db
from .moreau import L1, TV1D, Tikhonov
from .oracles import pgm_reference, ridge_solution
from .phantoms import piecewise_constant_1d, shepp_like
from .radon import radon_matrix
from .solvers import (Problem, SolverConfig, bcred_run, full_partition,
                      pgm_run, red_full_run, write_trace_csv)

__all__ = [
    "SCHEMA",
    "load_config",
    "parse_config_text",
    "resolve_config",
    "format_config",
    "run_experiment",
    "run_denoise",
    "ExperimentResult",
]


def _str(v):
    return v


def _int(v):
    return int(v)


def _u64(v):
    n = int(v)
    if not 0 <= n < 2 ** 64:
        raise ValueError("seed must be a u64")
    return n


def _float(v):
    return float(v)


def _float_or_inf(v):
    return math.inf if v.strip().lower() in ("inf", "none") else float(v)


def _bool(v):
    s = v.strip().lower()
    if s == "true":
        return True
    if s == "false":
        return False
    raise ValueError("expected true or false")


def _opt(conv):
    def parse(v):
        return None if v.strip().lower() == "none" else conv(v)
    return parse


def _gamma(v):
    return "auto" if v.strip().lower() == "auto" else float(v)


def _floats(v):
    return tuple(float(t) for t in v.replace(",", " ").split())


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


# key -> (parser, default).  A default of ``None`` means "unset".
SCHEMA = {
    "phantom.kind": (_choice("piecewise-constant-1d", "shepp-like", "file"), None),
    "phantom.n": (_opt(_int), None),
    "phantom.height": (_opt(_int), None),
    "phantom.width": (_opt(_int), None),
    "phantom.seed": (_u64, 0),
    "phantom.pieces": (_opt(_int), None),
    "phantom.path": (_opt(_str), None),
    "forward.kind": (_choice("gaussian-random", "identity", "subsampled-fourier",
                             "matrix-file", "radon"), None),
    "forward.m": (_opt(_int), None),
    "forward.seed": (_u64, 0),
    "forward.mask": (_choice("radial", "random", "file"), "radial"),
    "forward.lines": (_int, 8),
    "forward.fraction": (_float, 0.5),
    "forward.mask_file": (_opt(_str), None),
    "forward.path": (_opt(_str), None),
    "forward.angles": (_int, 8),
    "noise.input_snr_db": (_float_or_inf, math.inf),
    "noise.seed": (_u64, 0),
    "denoiser.kind": (_choice("identity", "soft-threshold", "tv1d", "tv2d",
                              "linear-smoother", "gradient-step"), None),
    "denoiser.lam": (_float, 0.1),
    "denoiser.kernel": (_floats, (0.25, 0.5, 0.25)),
    "denoiser.inner_iters": (_int, 100),
    "denoiser.inner_tol": (_float, 1e-8),
    "solver.algorithm": (_choice("bcred", "red", "pgm"), "bcred"),
    "solver.tau": (_float, 1.0),
    "solver.gamma": (_gamma, "auto"),
    "solver.selection": (_choice("iid", "epoch-shuffle", "cyclic"), "cyclic"),
    "solver.seed": (_u64, 0),
    "solver.iterations": (_int, 100),
    "solver.x0": (_choice("zeros", "adjoint-y", "file"), "zeros"),
    "solver.x0_file": (_opt(_str), None),
    "solver.stop_tol": (_opt(_float), None),
    "solver.cached_residual": (_bool, False),
    "solver.pad": (_opt(_int), None),
    "solver.allow_unsafe_step": (_bool, False),
    "solver.check_distance": (_bool, False),
    "solver.trace_every": (_int, 1),
    "solver.record_wall_time": (_bool, False),
    "partition.kind": (_choice("contiguous-1d", "tile-2d"), "contiguous-1d"),
    "partition.blocks": (_int, 1),
    "partition.tile_h": (_opt(_int), None),
    "partition.tile_w": (_opt(_int), None),
    "oracle.kind": (_choice("none", "ridge", "pgm"), "none"),
    "oracle.iterations": (_int, 100000),
    "certificate.enabled": (_bool, True),
    "certificate.trials": (_int, 200),
    "certificate.seed": (_u64, 0),
    "output.trace": (_str, "trace.csv"),
    "output.image": (_opt(_str), None),
    "output.summary": (_str, "summary.ini"),
}

_PATH_KEYS = ("phantom.path", "forward.mask_file", "forward.path", "solver.x0_file",
              "output.trace", "output.image", "output.summary")
_REQUIRED = ("phantom.kind", "forward.kind", "denoiser.kind")


def parse_config_text(text):
    """Raw ``{key: string}`` mapping; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",),
                                   strict=True, default_section="\0")
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", key=exc.option) from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return {k.strip(): v.strip() for k, v in cp.items("config")}


def resolve_config(raw, base_dir="."):
    """Validate keys and values, fill defaults and absolutize paths."""
    cfg = {}
    for key, text in raw.items():
        if key.startswith("result."):
            continue
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key)
        parser = SCHEMA[key][0]
        try:
            cfg[key] = parser(text)
        except ValueError as exc:
            raise ConfigError(f"bad value {text!r} ({exc})", key=key) from exc
    for key in _REQUIRED:
        if cfg.get(key) is None:
            raise ConfigError("missing required key", key=key)
    for key, (_, default) in SCHEMA.items():
        cfg.setdefault(key, default)
    for key in _PATH_KEYS:
        if cfg[key] is not None:
            cfg[key] = os.path.abspath(os.path.join(base_dir, cfg[key]))
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg):
    kind = cfg["phantom.kind"]
    if kind == "piecewise-constant-1d" and cfg["phantom.n"] is None:
        raise ConfigError("piecewise-constant-1d needs n", key="phantom.n")
    if kind == "shepp-like":
        for k in ("phantom.height", "phantom.width"):
            if cfg[k] is None:
                raise ConfigError("shepp-like needs height and width", key=k)
    if kind == "file" and cfg["phantom.path"] is None:
        raise ConfigError("file phantom needs a path", key="phantom.path")
    fk = cfg["forward.kind"]
    if fk == "gaussian-random" and cfg["forward.m"] is None:
        raise ConfigError("gaussian-random needs m", key="forward.m")
    if fk == "matrix-file" and cfg["forward.path"] is None:
        raise ConfigError("matrix-file needs a path", key="forward.path")
    if fk == "subsampled-fourier" and cfg["forward.mask"] == "file" \
            and cfg["forward.mask_file"] is None:
        raise ConfigError("mask=file needs mask_file", key="forward.mask_file")
    if cfg["solver.x0"] == "file" and cfg["solver.x0_file"] is None:
        raise ConfigError("x0=file needs x0_file", key="solver.x0_file")
    if cfg["partition.kind"] == "tile-2d":
        for k in ("partition.tile_h", "partition.tile_w"):
            if cfg[k] is None:
                raise ConfigError("tile-2d needs tile sizes", key=k)
    if cfg["oracle.kind"] == "ridge" and cfg["denoiser.kind"] != "gradient-step":
        raise ConfigError("the ridge oracle needs a gradient-step denoiser",
                          key="oracle.kind")
    paths = [cfg[k] for k in ("output.trace", "output.image", "output.summary")
             if cfg[k] is not None]
    if len(set(paths)) != len(paths):
        raise ConfigError("output paths must be distinct", key="output.summary")


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve_config(parse_config_text(text), os.path.dirname(os.path.abspath(path)))


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, tuple):
        return ", ".join(format_float(t) for t in v)
    return str(v)


def format_config(cfg, results=None):
    """Render the resolved config (and optional ``result.*`` lines)."""
    lines = [f"{k} = {_format_value(cfg[k])}" for k in SCHEMA]
    if results:
        lines += [f"result.{k} = {_format_value(v)}" for k, v in results.items()]
    return "\n".join(lines) + "\n"


def _build_phantom(cfg):
    kind = cfg["phantom.kind"]
    if kind == "piecewise-constant-1d":
        return piecewise_constant_1d(cfg["phantom.n"], cfg["phantom.seed"],
                                     cfg["phantom.pieces"]), None
    if kind == "shepp-like":
        img = shepp_like(cfg["phantom.height"], cfg["phantom.width"], cfg["phantom.seed"])
    else:
        img = read_pgm(cfg["phantom.path"])
    return img.reshape(-1), img.shape


def _build_forward(cfg, n, shape):
    kind = cfg["forward.kind"]
    if kind == "radon":
        if shape is None or shape[0] != shape[1]:
            raise ConfigError("radon needs a square 2-D phantom", key="forward.kind")
        return build_forward_model(
            {"kind": "dense", "matrix": radon_matrix(shape[0], cfg["forward.angles"])}, n=n)
    if kind == "subsampled-fourier":
        H, W = shape if shape is not None else (1, n)
        mk = cfg["forward.mask"]
        if mk == "file":
            return build_forward_model({"kind": kind, "mask_file": cfg["forward.mask_file"]}, n=n)
        mask = radial_mask(H, W, cfg["forward.lines"]) if mk == "radial" \
            else random_mask(H, W, cfg["forward.fraction"], cfg["forward.seed"])
        return build_forward_model({"kind": kind, "mask": mask}, n=n)
    return build_forward_model({"kind": kind, "path": cfg["forward.path"]},
                               n=n, m=cfg["forward.m"], seed=cfg["forward.seed"])


class _TV2DRegularizer:
    """``lam * TV(x)`` on an image, with an inexact iterative prox."""

    def __init__(self, lam, shape, n_iter, tol):
        self.lam, self.shape, self.n_iter, self.tol = lam, shape, n_iter, tol

    def __call__(self, x):
        return self.lam * tv2d_value(np.reshape(x, self.shape))

    def prox(self, x, mu):
        img = tv2d_prox(np.reshape(x, self.shape), mu * self.lam, self.n_iter, self.tol)
        return img.reshape(-1)


class _REDRegularizer:
    def __init__(self, D, tau):
        self.D, self.tau = D, tau

    def __call__(self, x):
        return red_objective_linear(self.D, x, self.tau)


def _build_denoiser(cfg, shape):
    """Denoiser and its explicit regularizer for the objective column.

    ``denoiser.lam`` is the regularization weight; prox denoisers use the
    threshold ``lam / tau`` so that BC-RED targets ``g + tau h_{1/tau}``.
    """
    kind = cfg["denoiser.kind"]
    lam, tau = cfg["denoiser.lam"], cfg["solver.tau"]
    if kind == "identity":
        return Identity(), None
    if kind == "soft-threshold":
        return SoftThreshold(lam / tau), L1(lam)
    if kind == "tv1d":
        return TV1DProx(lam / tau), TV1D(lam)
    if kind == "tv2d":
        if shape is None:
            raise ConfigError("tv2d needs a 2-D phantom", key="denoiser.kind")
        D = TV2DProx(lam / tau, shape, cfg["denoiser.inner_iters"], cfg["denoiser.inner_tol"])
        return D, _TV2DRegularizer(lam, shape, cfg["denoiser.inner_iters"],
                                   cfg["denoiser.inner_tol"])
    if kind == "linear-smoother":
        D = LinearSmoother(cfg["denoiser.kernel"], shape)
        return D, _REDRegularizer(D, tau)
    return GradientStep(lam, tau), Tikhonov(lam)


@dataclass
class ExperimentResult:
    x: np.ndarray
    x_true: np.ndarray
    trace: object
    results: dict
    config: dict


def _build(cfg):
    x_true, shape = _build_phantom(cfg)
    n = x_true.size
    model = _build_forward(cfg, n, shape)
    y_clean = model.apply(x_true)
    if math.isinf(cfg["noise.input_snr_db"]):
        y = y_clean
    else:
        y = add_noise_at_input_snr(y_clean, cfg["noise.input_snr_db"], cfg["noise.seed"]).y
    D, reg = _build_denoiser(cfg, shape)
    if cfg["partition.kind"] == "tile-2d":
        if shape is None:
            raise ConfigError("tile-2d needs a 2-D phantom", key="partition.kind")
        pspec = {"kind": "tile-2d", "height": shape[0], "width": shape[1],
                 "tile_h": cfg["partition.tile_h"], "tile_w": cfg["partition.tile_w"]}
    else:
        pspec = {"kind": "contiguous-1d", "blocks": cfg["partition.blocks"]}
    partition = make_partition(n, pspec)
    return x_true, shape, model, y, D, reg, partition


def run_experiment(cfg):
    """Run a resolved config and write its trace, image and summary files.

    Every output is a function of the config alone unless
    ``solver.record_wall_time`` is on.
    """
    x_true, shape, model, y, D, reg, partition = _build(cfg)
    tau = cfg["solver.tau"]
    algo = cfg["solver.algorithm"]
    lip = estimate_lipschitz(model, partition if algo == "bcred" else full_partition(model.n))

    x_star = None
    if cfg["oracle.kind"] == "ridge":
        x_star = ridge_solution(model, y, cfg["denoiser.lam"])
    elif cfg["oracle.kind"] == "pgm":
        if not hasattr(reg, "prox"):
            raise ConfigError("the pgm oracle needs a prox regularizer", key="oracle.kind")
        x_star, _ = pgm_reference(model, y, reg, cfg["oracle.iterations"])

    problem = Problem(model=model, y=y, denoiser=D, regularizer=reg, x_star=x_star)
    sc = SolverConfig(
        tau=tau, gamma=cfg["solver.gamma"], selection=cfg["solver.selection"],
        seed=cfg["solver.seed"], iterations=cfg["solver.iterations"],
        x0=_initial_guess(cfg), stop_tol=cfg["solver.stop_tol"],
        cached_residual=cfg["solver.cached_residual"], pad=cfg["solver.pad"],
        allow_unsafe_step=cfg["solver.allow_unsafe_step"],
        check_distance=cfg["solver.check_distance"],
        record_wall_time=cfg["solver.record_wall_time"],
        trace_every=cfg["solver.trace_every"],
    )
    if algo == "bcred":
        x, trace = bcred_run(problem, partition, sc, lipschitz=lip)
    elif algo == "red":
        x, trace = red_full_run(problem, sc, lipschitz=lip)
    else:
        if not hasattr(reg, "prox"):
            raise ConfigError("pgm needs a denoiser kind with a prox", key="solver.algorithm")
        x, trace = pgm_run(problem, sc, lipschitz=lip)

    results = {
        "final_snr_db": snr_db(x, x_true),
        "final_residual": trace.residual[-1],
        "final_normalized_residual": trace.normalized_residual[-1],
        "iterations": trace.iterations,
        "gamma": trace.gamma,
        "L_max": lip.L_max,
        "L_global": lip.L_global,
        "unsafe_step": trace.unsafe_step,
    }
    if trace.objective is not None:
        results["final_objective"] = trace.objective[-1]
    if x_star is not None:
        d = float(np.linalg.norm(x - x_star))
        results["final_distance"] = d
        nrm = float(np.linalg.norm(x_star))
        results["relative_distance"] = d / nrm if nrm > 0 else d
        results["distance_violations"] = trace.distance_violations
    results["valid"] = trace.valid
    if cfg["certificate.enabled"]:
        rep = check_block_nonexpansive(D, partition, cfg["certificate.trials"],
                                       cfg["certificate.seed"], pad=cfg["solver.pad"],
                                       shape=shape)
        results["certificate"] = "pass" if rep.passed else "fail"
        results["certificate_max_ratio"] = rep.max_ratio
    else:
        results["certificate"] = "skipped"

    for key in ("output.trace", "output.image", "output.summary"):
        if cfg[key] is not None:
            os.makedirs(os.path.dirname(cfg[key]), exist_ok=True)
    write_trace_csv(trace, cfg["output.trace"])
    _write_image(x, shape, cfg["output.image"])
    with open(cfg["output.summary"], "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_config(cfg, results))
    return ExperimentResult(x=x, x_true=x_true, trace=trace, results=results, config=cfg)


def _initial_guess(cfg):
    """``solver.x0``; a file is a PGM (by extension) or a one-column CSV."""
    if cfg["solver.x0"] != "file":
        return cfg["solver.x0"]
    path = cfg["solver.x0_file"]
    if path.lower().endswith(".pgm"):
        return read_pgm(path).reshape(-1)
    return read_vector_csv(path)


def _write_image(x, shape, path):
    if path is None:
        return
    if shape is None:
        write_vector_csv(x, path)
    else:
        write_pgm(x.reshape(shape), path)


def run_denoise(cfg):
    """Apply the configured denoiser once to the (noisy) phantom.

    Noise at ``noise.input_snr_db`` is added to the phantom itself.  Writes
    ``output.image`` when set and returns ``(denoised, noisy, x_true)``.
    """
    x_true, shape = _build_phantom(cfg)
    if math.isinf(cfg["noise.input_snr_db"]):
        noisy = x_true.copy()
    else:
        noisy = add_noise_at_input_snr(x_true, cfg["noise.input_snr_db"], cfg["noise.seed"]).y
    D, _ = _build_denoiser(cfg, shape)
    out = D.denoise(noisy, shape)
    if cfg["output.image"] is not None:
        os.makedirs(os.path.dirname(cfg["output.image"]), exist_ok=True)
    _write_image(out, shape, cfg["output.image"])
    return out, noisy, x_true


def generate_matrix(spec, out_path):
    """Write a matrix file from ``radon:N:ANGLES``, ``gaussian:M:N:SEED`` or
    ``identity:N``.  Returns the matrix shape."""
    parts = spec.split(":")
    try:
        kind, args = parts[0], [int(p) for p in parts[1:]]
    except ValueError as exc:
        raise ConfigError(f"bad matrix spec {spec!r}") from exc
    if kind == "radon" and len(args) == 2:
        A = radon_matrix(args[0], args[1])
    elif kind == "gaussian" and len(args) == 3:
        A = build_forward_model({"kind": "gaussian-random"}, m=args[0], n=args[1],
                                seed=args[2]).matrix
    elif kind == "identity" and len(args) == 1:
        A = np.eye(args[0])
    else:
        raise ConfigError(f"bad matrix spec {spec!r}; expected radon:N:ANGLES, "
                          "gaussian:M:N:SEED or identity:N")
    write_matrix_file(A, out_path)
    return A.shape
