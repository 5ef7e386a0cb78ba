"""Command-line front end: ``tep detect|segment|decompose|synth|verify|refine|replay``.

Every command parameter is declared once in a table that drives both the
argparse flags and the ``key=value`` config-file reader.  Values resolve
as defaults < config file < flags.  Successful runs write
``<output>.manifest.txt`` which ``tep replay`` can re-execute.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from .consensus import TepConfig, detect_edges
from .edge_segmentation import (DiffusionConfig, decompose, refine_junctions,
                                remainder_display, segment_image)
from .errors import ConfigError, ImageIOError, NumericalError, TepError
from .image_core import (is_raw, load_color_image, load_image, load_raw, save_color_image,
                         save_raw, save_scalar_map, write_png)
from .random_field import (FieldSpec, covariance_frobenius_bound, expected_response_same,
                           format_table, hellinger_separation, mc_conditional_variance,
                           mc_response_mean, response_variance_conditional, sample_fields,
                           scan_patch_width, synthesize_field)
from .synthetic import stripes

logger = logging.getLogger("tep")

MANIFEST_SUFFIX = ".manifest.txt"
CHECKS = ("theorem1", "theorem2", "hellinger", "frobenius", "periodscan")


# ------------------------------------------------------------ value parsing

def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def parse_delta(text):
    if text is None or str(text).strip().lower() == "auto":
        return "auto"
    return int(text)


def parse_lambda(text):
    if text is None or str(text).strip().lower() == "auto":
        return "auto"
    return float(text)


def parse_size(text) -> tuple[int, int]:
    if isinstance(text, tuple):
        return text
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected WxH, got {text!r}")
    w, h = int(parts[0]), int(parts[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"size must be positive, got {text!r}")
    return w, h


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        if len(value) == 2 and all(isinstance(v, int) for v in value) and isinstance(value, tuple):
            return f"{value[0]}x{value[1]}"
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[Any], Any]
    default: Any
    units: str
    help: str
    minimum: float | None = None
    exclusive: bool = False
    required: bool = False
    is_input: bool = False
    is_output: bool = False
    aliases: tuple[str, ...] = ()

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    @property
    def flags(self) -> list[str]:
        return [self.flag, *self.aliases]

    def describe_range(self) -> str:
        if self.minimum is None:
            return ""
        return f"{'>' if self.exclusive else '>='} {self.minimum:g}"

    def coerce(self, raw):
        try:
            value = self.parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"key {self.name}: cannot parse {raw!r} ({exc}); "
                              f"expected {self.units}") from exc
        if self.minimum is not None and value is not None and not isinstance(value, str):
            vals = value if isinstance(value, (list, tuple)) else [value]
            for v in vals:
                if v < self.minimum or (self.exclusive and v == self.minimum):
                    raise ConfigError(f"key {self.name}: {v} out of range; accepted range "
                                      f"{self.describe_range()}")
        return value

    def help_text(self) -> str:
        default = "required" if self.required else f"default: {format_value(self.default)}"
        return f"{self.help} [{self.units}; {default}]"


def _path(text):
    return str(text)


def _optional_path(text):
    return None if text in (None, "", "none") else str(text)


INPUT = Param("input", _path, None, "path", "input image (PNG, PGM or PPM)",
              required=True, is_input=True)
OUTPUT = Param("output", _path, None, "path",
               "primary output; .png writes 8-bit, any other extension a TEPF1 raw-float dump",
               required=True, is_output=True)

DETECT_PARAMS = [
    Param("r", int, 3, "pixels", "patch half-width", minimum=1),
    Param("R", int, 20, "pixels", "comparison window half-width (must exceed r)", minimum=2),
    Param("lambda", parse_lambda, "auto", "response units squared or auto",
          "scale weight of the two-phase energy; auto is 0.015 for normalized responses "
          "and 700 for raw ones", minimum=0, exclusive=True),
    Param("delta", parse_delta, "auto", "pixels or auto",
          "center-repair half-width; auto is 2 for r < 10 and 5 otherwise"),
    Param("normalize", parse_bool, True, "true/false", "divide responses by the squared intensity range"),
    Param("image_range", float, 255.0, "intensity", "intensity range used for normalization",
          minimum=0, exclusive=True),
]

DIFFUSION_PARAMS = [
    Param("alpha", float, 0.2, "exponent", "edge-stopping exponent of g", minimum=0, exclusive=True),
    Param("gamma1", float, 0.05, "1/time", "brightness fidelity weight", minimum=0),
    Param("gamma2", float, 0.05, "1/time", "chromaticity fidelity weight", minimum=0),
    Param("beta", float, 1.0, "1/time", "unit-norm penalty weight", minimum=0),
    Param("dt", float, 0.1, "time", "explicit time step", minimum=0, exclusive=True),
    Param("iters", int, 500, "steps", "maximum number of time steps", minimum=0),
]

COMMANDS: dict[str, list[Param]] = {
    "detect": [INPUT, OUTPUT,
               Param("raw", _optional_path, None, "path", "also write V as a TEPF1 raw-float dump",
                     is_output=True, aliases=("--dump-v-raw",)),
               Param("mask", _optional_path, None, "path",
                     "also write the observer-domain mask as an 8-bit PNG", is_output=True),
               *DETECT_PARAMS],
    "segment": [Param("input", _path, None, "path", "color input image (PNG or PPM)",
                      required=True, is_input=True),
                OUTPUT,
                Param("edges", _path, "auto", "path or auto",
                      "edge function V (raw dump or 8-bit PNG); auto runs detect on the input"),
                Param("remainder", _optional_path, None, "path",
                      "also write the texture remainder (128 = zero) as PNG", is_output=True),
                *DIFFUSION_PARAMS, *DETECT_PARAMS],
    "decompose": [Param("input", _path, None, "path", "original color image",
                        required=True, is_input=True),
                  Param("segmented", _path, None, "path", "piecewise-smooth image from segment",
                        required=True, is_input=True),
                  Param("output", _path, None, "path", "remainder display PNG (128 = zero)",
                        required=True, is_output=True),
                  Param("raw", _optional_path, None, "path",
                        "also write the signed remainder as a 3-channel TEPF1 dump", is_output=True)],
    "synth": [Param("mu", float, 0.0, "intensity", "field mean"),
              Param("sigma", float, 1.0, "intensity", "field standard deviation", minimum=0),
              Param("ell", float, 2.0, "pixels", "correlation length", minimum=0, exclusive=True),
              Param("size", parse_size, (128, 128), "WxH pixels", "field size"),
              OUTPUT],
    "verify": [Param("mu", float, 0.0, "intensity", "mean of field p"),
               Param("sigma", float, 1.0, "intensity", "standard deviation of field p", minimum=0),
               Param("ell", float, 2.0, "pixels", "correlation length of field p",
                     minimum=0, exclusive=True),
               Param("mu_q", float, 1.5, "intensity", "mean of field q (hellinger)"),
               Param("sigma_q", float, 1.0, "intensity", "standard deviation of field q (hellinger)",
                     minimum=0),
               Param("ell_q", float, 2.0, "pixels", "correlation length of field q (hellinger)",
                     minimum=0, exclusive=True),
               Param("r", parse_int_list, None, "pixels, comma list",
                     "patch half-widths; per-check default theorem1 1,2,3 theorem2 1,2,3,4 "
                     "hellinger 1..8 frobenius 0..4 periodscan 1..12", minimum=0),
               Param("tau", parse_float_list, None, "pixels, comma list",
                     "separations; per-check default theorem1 8,12,16 theorem2/hellinger 12 "
                     "frobenius 10,12,14,16,20 periodscan 8", minimum=0),
               Param("samples", int, None, "draws",
                     "Monte-Carlo sample count; per-check default theorem1 10000 theorem2 100000 "
                     "hellinger 2000", minimum=1),
               Param("observers", int, 20, "patches",
                     "observer patches averaged by theorem2 for the rate fit", minimum=1),
               Param("input", _optional_path, None, "path",
                     "periodscan image; synthetic period-8 stripes when omitted", is_input=True),
               Param("report", _optional_path, None, "path", "tab-separated report; stdout when omitted",
                     is_output=True)],
    "refine": [Param("input", _path, None, "path", "edge function V (raw dump or 8-bit PNG)",
                     required=True, is_input=True),
               OUTPUT,
               Param("line", int, 7, "pixels", "odd length of the line structuring element", minimum=3),
               Param("orients", int, 4, "count", "number of line orientations over 180 degrees",
                     minimum=1)],
}

GLOBAL_PARAMS = [
    Param("threads", int, 0, "count", "worker threads; 0 uses all available cores", minimum=0),
    Param("seed", int, 0, "integer", "random seed", minimum=0),
]

DESCRIPTIONS = {
    "detect": "compute the consensus edge function V of a grayscale image",
    "segment": "edge-guided brightness/chromaticity smoothing of a color image",
    "decompose": "texture remainder of an image after segmentation",
    "synth": "sample a Gaussian random-field texture",
    "verify": "Monte-Carlo checks of the patch-response statistics",
    "refine": "line closing of V to bridge weak edges at junctions",
    "replay": "re-run a command from its manifest",
}


# ------------------------------------------------------------ configuration

class _Parser(argparse.ArgumentParser):
    """Argument errors raise ``ConfigError`` instead of exiting with code 2."""

    def error(self, message):
        raise ConfigError(message)


def read_config_file(path) -> dict[str, str]:
    values = {}
    try:
        with open(os.fspath(path), encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ImageIOError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
        key, value = (s.strip() for s in text.split("=", 1))
        values[key] = value
    return values


def _table(command: str) -> dict[str, Param]:
    return {p.name: p for p in COMMANDS[command] + GLOBAL_PARAMS}


def resolve(command: str, file_values: dict[str, str], flag_values: dict[str, Any]) -> dict[str, Any]:
    """Merge defaults, file and flags, then apply cross-field checks."""
    table = _table(command)
    cfg = {name: p.default for name, p in table.items()}
    for key, raw in file_values.items():
        if key not in table:
            raise ConfigError(f"unknown key {key!r} for {command}; accepted keys: "
                              f"{', '.join(sorted(table))}")
        cfg[key] = table[key].coerce(raw)
    for key, raw in flag_values.items():
        cfg[key] = table[key].coerce(raw)
    for name, p in table.items():
        if p.required and cfg[name] is None:
            raise ConfigError(f"key {name} is required for {command}")
    validate(command, cfg)
    return cfg


def tep_config(cfg) -> TepConfig:
    delta = None if cfg["delta"] == "auto" else cfg["delta"]
    lam = None if cfg["lambda"] == "auto" else cfg["lambda"]
    return TepConfig(r=cfg["r"], R=cfg["R"], lam=lam, delta=delta,
                     normalize=cfg["normalize"], image_range=cfg["image_range"])


def diffusion_config(cfg) -> DiffusionConfig:
    return DiffusionConfig(alpha=cfg["alpha"], gamma1=cfg["gamma1"], gamma2=cfg["gamma2"],
                           beta=cfg["beta"], dt=cfg["dt"], iters=cfg["iters"])


def validate(command: str, cfg: dict[str, Any]) -> None:
    if "R" in cfg:
        tep_config(cfg)
    if "alpha" in cfg:
        diffusion_config(cfg)
    if command == "refine" and cfg["line"] % 2 == 0:
        raise ConfigError(f"key line: {cfg['line']} out of range; accepted range odd >= 3")


def parse_config(command: str, argv: list[str]) -> dict[str, Any]:
    """Parse ``argv`` (flags after the subcommand) into a validated config."""
    parser = build_parser()
    ns = parser.parse_args([command, *argv])
    return _config_from_namespace(ns)


def _config_from_namespace(ns) -> dict[str, Any]:
    command = ns.command
    given = {k: v for k, v in vars(ns).items()
             if k not in ("command", "check", "config", "quiet", "manifest") and v is not None}
    file_values = read_config_file(ns.config) if getattr(ns, "config", None) else {}
    cfg = resolve(command, file_values, given)
    if command == "verify":
        cfg["check"] = ns.check
    return cfg


def _add_globals(parser) -> None:
    # suppressed defaults let the flags appear before or after the subcommand
    sup = argparse.SUPPRESS
    parser.add_argument("--config", default=sup, metavar="FILE",
                        help="key=value config file, '#' starts a comment [path; default: none]")
    for p in GLOBAL_PARAMS:
        parser.add_argument(p.flag, dest=p.name, default=sup, metavar=p.name.upper(),
                            help=p.help_text())
    parser.add_argument("--quiet", action="store_true", default=sup,
                        help="only log warnings and errors [flag; default: off]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tep", description="Texture edge detection by patch consensus.")
    parser.add_argument("--version", action="version", version=f"tep {__version__}")
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True
    for command, params in COMMANDS.items():
        sp = sub.add_parser(command, help=DESCRIPTIONS[command], description=DESCRIPTIONS[command])
        if command == "verify":
            sp.add_argument("check", choices=CHECKS, help="which statistic to verify")
        for p in params:
            sp.add_argument(*p.flags, dest=p.name, default=None, metavar=p.name.upper(),
                            help=p.help_text())
        _add_globals(sp)
    rp = sub.add_parser("replay", help=DESCRIPTIONS["replay"], description=DESCRIPTIONS["replay"])
    rp.add_argument("manifest", help="manifest written by an earlier run [path; required]")
    _add_globals(rp)
    return parser


# ------------------------------------------------------------------ manifest

def file_digest(path) -> str:
    h = hashlib.blake2b(digest_size=8)
    try:
        with open(os.fspath(path), "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def manifest_path(output) -> str:
    return os.fspath(output) + MANIFEST_SUFFIX


def write_manifest(command, cfg, duration, extra=None) -> str | None:
    primary = cfg.get("report") if command == "verify" else cfg.get("output")
    if not primary:
        return None
    lines = [f"command={command}", f"version={__version__}"]
    if command == "verify":
        lines.append(f"check={cfg['check']}")
    for name, p in _table(command).items():
        if cfg.get(name) is not None:
            lines.append(f"param.{name}={format_value(cfg[name])}")
    for name, p in _table(command).items():
        if p.is_input and cfg.get(name):
            lines.append(f"digest.{name}=blake2b64:{file_digest(cfg[name])}")
    lines.append(f"seed={cfg['seed']}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    lines.append(f"duration_s={duration:.3f}")
    path = manifest_path(primary)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ImageIOError(f"cannot write manifest {path}: {exc}") from exc
    return path


def read_manifest(path) -> dict[str, str]:
    return read_config_file(path)


def replay_argv(manifest: dict[str, str]) -> list[str]:
    """Rebuild the argument list of the recorded run."""
    command = manifest.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    argv = [command]
    if command == "verify":
        argv.append(manifest["check"])
    for key, value in manifest.items():
        if key.startswith("param."):
            name = key[len("param."):]
            if name not in _table(command):
                raise ConfigError(f"manifest key {key!r} is not a {command} parameter")
            argv += [_table(command)[name].flag, value]
    return argv


# ------------------------------------------------------------------ commands

def _threads(cfg) -> int:
    return cfg["threads"] or os.cpu_count() or 1


def _write_map(values, path) -> None:
    mode = "normalized-8bit" if str(path).lower().endswith(".png") else "raw-float"
    save_scalar_map(values, path, mode=mode)


def _load_edge_map(path) -> np.ndarray:
    """Raw dumps are taken as is; 8-bit rasters are read as ``value / 255``."""
    if is_raw(path):
        return load_raw(path).data
    return load_image(path).data / 255.0


def run_detect(cfg) -> dict:
    img = load_image(cfg["input"])
    edge = detect_edges(img, tep_config(cfg), threads=_threads(cfg))
    _write_map(edge.V, cfg["output"])
    if cfg["raw"]:
        save_raw(edge.V, cfg["raw"])
    if cfg["mask"]:
        _write_map(edge.valid.astype(np.float64), cfg["mask"])
    return {"stat.hits_total": int(edge.hits.sum()), "stat.v_max": repr(float(edge.V.max()))}


def run_segment(cfg) -> dict:
    img = load_color_image(cfg["input"])
    if cfg["edges"] == "auto":
        V = detect_edges(load_image(cfg["input"]), tep_config(cfg), threads=_threads(cfg)).V
    else:
        V = _load_edge_map(cfg["edges"])
    if V.shape != (img.height, img.width):
        raise ConfigError(f"edge map {V.shape} does not match image {(img.height, img.width)}")
    if V.min() < 0 or V.max() > 1:
        raise ConfigError("edge map values must lie in [0, 1]")
    seg = segment_image(img, V, diffusion_config(cfg))
    save_color_image(seg, cfg["output"])
    if cfg["remainder"]:
        write_png(remainder_display(decompose(img, seg)), cfg["remainder"])
    return {}


def run_decompose(cfg) -> dict:
    img = load_color_image(cfg["input"])
    seg = load_color_image(cfg["segmented"])
    if img.data.shape != seg.data.shape:
        raise ConfigError(f"images differ in size: {img.data.shape[:2]} vs {seg.data.shape[:2]}")
    rem = decompose(img, seg)
    write_png(remainder_display(rem), cfg["output"])
    if cfg["raw"]:
        save_raw(rem.data, cfg["raw"])
    return {}


def run_synth(cfg) -> dict:
    width, height = cfg["size"]
    field = synthesize_field(FieldSpec(cfg["mu"], cfg["sigma"], cfg["ell"], cfg["seed"]), width, height)
    _write_map(field.data, cfg["output"])
    return {}


def _verify_table(cfg) -> str:
    check = cfg["check"]
    spec = FieldSpec(cfg["mu"], cfg["sigma"], cfg["ell"], cfg["seed"])
    defaults = {
        "theorem1": ([1, 2, 3], [8.0, 12.0, 16.0], 10_000),
        "theorem2": ([1, 2, 3, 4], [12.0], 100_000),
        "hellinger": (list(range(1, 9)), [12.0], 2000),
        "frobenius": ([0, 1, 2, 3, 4], [10.0, 12.0, 14.0, 16.0, 20.0], 0),
        "periodscan": (list(range(1, 13)), [8.0], 0),
    }[check]
    rs = cfg["r"] or defaults[0]
    taus = cfg["tau"] or defaults[1]
    n = cfg["samples"] or defaults[2]
    rows = []
    if check == "theorem1":
        header = ["r", "tau", "theory", "empirical", "stderr"]
        for r in rs:
            for tau in taus:
                if tau != int(tau):
                    raise ConfigError(f"key tau: theorem1 needs integer separations, got {tau}")
                seeded = FieldSpec(spec.mu, spec.sigma, spec.ell, spec.seed + 1000 * r + int(tau))
                est = mc_response_mean(seeded, r, int(tau), n, workers=_threads(cfg))
                rows.append([r, tau, expected_response_same(spec, tau), est.value, est.stderr])
    elif check == "theorem2":
        header = ["r", "tau", "theory", "empirical", "stderr", "mean_theory_over_observers",
                  "theory_times_d"]
        rng = np.random.default_rng(spec.seed)
        for r in rs:
            for tau in taus:
                d = (2 * r + 1) ** 2
                patches = sample_fields(spec, 2 * r + 1, 2 * r + 1, cfg["observers"], rng)
                vs = [p.ravel(order="F") for p in patches]
                theory = [response_variance_conditional(spec, v, tau, r) for v in vs]
                seeded = FieldSpec(spec.mu, spec.sigma, spec.ell, spec.seed + 1000 * r + int(tau))
                est = mc_conditional_variance(seeded, vs[0], r, tau, n, workers=_threads(cfg))
                rows.append([r, tau, theory[0], est.value, est.stderr, float(np.mean(theory)),
                             float(np.mean(theory)) * d])
    elif check == "hellinger":
        header = ["r", "tau", "h2_observer_p", "h2_observer_q"]
        q = FieldSpec(cfg["mu_q"], cfg["sigma_q"], cfg["ell_q"], cfg["seed"] + 1)
        for r in rs:
            for tau in taus:
                rows.append([r, tau, hellinger_separation(spec, q, r, tau, n),
                             hellinger_separation(q, spec, r, tau, n)])
    elif check == "frobenius":
        header = ["r", "tau", "exact", "bound", "ratio"]
        for r in rs:
            for tau in taus:
                if r > 0 and not tau > 2 * np.sqrt(2) * r:
                    continue
                exact, bound = covariance_frobenius_bound(spec, r, tau)
                rows.append([r, tau, exact, bound, exact / bound if bound > 0 else 0.0])
    else:
        header = ["r", "tau", "mean", "variance", "observers"]
        img = load_image(cfg["input"]) if cfg["input"] else stripes()
        for tau in taus:
            for row in scan_patch_width(img, rs, tau):
                rows.append([row.r, tau, row.mean, row.variance, row.n_observers])
    return format_table(header, rows)


def run_verify(cfg) -> dict:
    table = _verify_table(cfg)
    if cfg["report"]:
        try:
            with open(cfg["report"], "w", encoding="utf-8") as fh:
                fh.write(table)
        except OSError as exc:
            raise ImageIOError(f"cannot write {cfg['report']}: {exc}") from exc
    else:
        sys.stdout.write(table)
    return {}


def run_refine(cfg) -> dict:
    V = _load_edge_map(cfg["input"])
    out = refine_junctions(V, cfg["line"], cfg["orients"])
    _write_map(out.V, cfg["output"])
    return {}


RUNNERS = {"detect": run_detect, "segment": run_segment, "decompose": run_decompose,
           "synth": run_synth, "verify": run_verify, "refine": run_refine}


def run(command: str, cfg: dict[str, Any]) -> int:
    start = time.perf_counter()
    extra = RUNNERS[command](cfg)
    path = write_manifest(command, cfg, time.perf_counter() - start, extra)
    if path:
        logger.info("manifest written to %s", path)
    return 0


# ---------------------------------------------------------------- entry

def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, TepError):
        return exc.exit_code, exc.kind
    if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError, OSError)):
        return 2, "io"
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return 3, "numeric"
    if isinstance(exc, ValueError):
        return 1, "config"
    return 4, "internal"


def _report(exc: BaseException) -> int:
    code, kind = _classify(exc)
    message = str(exc).replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    print(f'error code={code} kind={kind} message="{message}"', file=sys.stderr)
    return code


def _setup_logging(quiet: bool) -> None:
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="tep: %(levelname)s: %(message)s", stream=sys.stderr, force=True)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = build_parser().parse_args(argv)
        _setup_logging(bool(getattr(ns, "quiet", False)))
        if ns.command == "replay":
            manifest = read_manifest(ns.manifest)
            threads = getattr(ns, "threads", None)
            ns = build_parser().parse_args(replay_argv(manifest))
            if threads is not None:
                ns.threads = threads
            cfg = _config_from_namespace(ns)
            for name, p in _table(ns.command).items():
                key = f"digest.{name}"
                if key in manifest and cfg.get(name):
                    current = "blake2b64:" + file_digest(cfg[name])
                    if current != manifest[key]:
                        logger.warning("input %s changed since the manifest was written", cfg[name])
        else:
            cfg = _config_from_namespace(ns)
        return run(ns.command, cfg)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - every failure maps to one exit line
        return _report(exc)


if __name__ == "__main__":
    sys.exit(main())
