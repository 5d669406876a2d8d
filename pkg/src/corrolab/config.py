"""Experiment configuration: sectioned INI files mapped onto dataclasses.

Sections and keys (all optional, defaults in the dataclasses below)::

    [domain]      W H r0 L M profile profile_file bump_height sigma_a sigma_b
    [flux]        Phi1 E contrast shape t1 T
    [impedance]   kind gamma gamma_bar base amplitude slope
    [solver]      h dt theta tol
    [experiment]  mode output workers amplitude_start n_amplitudes resolution
                  s1 target_amplitude n_modes noise seed max_iter weight
"""
from __future__ import annotations

import configparser
import io
import os
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .errors import ConfigParseError

MODES = ("validate", "solve", "sweep", "inequalities", "reconstruct")


@dataclass(frozen=True)
class DomainConfig:
    W: float = 1.0
    H: float = 1.0
    r0: float = 0.1
    L: float = 1.0
    M: float = 120.0
    profile: str = "bump"
    profile_file: str = ""
    bump_height: float = 0.02
    sigma_a: Optional[float] = None
    sigma_b: Optional[float] = None


@dataclass(frozen=True)
class FluxConfig:
    Phi1: float = 0.05
    E: float = 4.0
    contrast: float = 1.0
    shape: str = "space"
    t1: float = 0.25
    T: float = 1.0


@dataclass(frozen=True)
class ImpedanceConfig:
    kind: str = "constant"
    gamma: float = 5.0
    gamma_bar: float = 10.0
    base: float = 0.3
    amplitude: float = 0.2
    slope: float = 0.0


@dataclass(frozen=True)
class SolverBlock:
    h: float = 0.0125
    dt: float = 0.0125
    theta: float = 1.0
    tol: float = 1e-10


@dataclass(frozen=True)
class ExperimentBlock:
    mode: str = "validate"
    output: str = "runs"
    workers: int = 1
    amplitude_start: float = 0.008
    n_amplitudes: int = 8
    resolution: Optional[float] = None
    s1: float = 0.25
    target_amplitude: float = 0.03
    n_modes: int = 3
    noise: float = 0.0
    seed: int = 0
    max_iter: int = 15
    weight: float = 1e-6


SECTIONS = {
    "domain": DomainConfig,
    "flux": FluxConfig,
    "impedance": ImpedanceConfig,
    "solver": SolverBlock,
    "experiment": ExperimentBlock,
}

_POSITIVE = {
    "domain": ("W", "H", "r0", "L", "M", "bump_height"),
    "flux": ("Phi1", "E", "t1", "T"),
    "impedance": ("gamma_bar",),
    "solver": ("h", "dt", "tol"),
    "experiment": ("workers", "amplitude_start", "n_amplitudes", "resolution", "s1",
                   "target_amplitude", "n_modes", "max_iter"),
}
_NONNEGATIVE = {
    "flux": ("contrast",),
    "impedance": ("gamma",),
    "experiment": ("noise", "seed", "weight"),
}
_CHOICES = {
    ("domain", "profile"): ("flat", "bump", "file"),
    ("flux", "shape"): ("space", "time"),
    ("impedance", "kind"): ("constant", "smooth"),
    ("experiment", "mode"): MODES,
}


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    flux: FluxConfig = field(default_factory=FluxConfig)
    impedance: ImpedanceConfig = field(default_factory=ImpedanceConfig)
    solver: SolverBlock = field(default_factory=SolverBlock)
    experiment: ExperimentBlock = field(default_factory=ExperimentBlock)
    source: str = ""

    @property
    def steps(self):
        return int(round(self.flux.T / self.solver.dt))

    def with_overrides(self, **experiment):
        """Copy with fields of the ``[experiment]`` block replaced."""
        from dataclasses import replace

        return replace(self, experiment=replace(self.experiment, **experiment))

    def to_ini(self):
        parser = configparser.ConfigParser()
        parser.optionxform = str
        for name in SECTIONS:
            block = asdict(getattr(self, name))
            parser[name] = {k: "" if v is None else repr(v) if isinstance(v, float) else str(v)
                            for k, v in block.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def problem(self):
        """Domain, flux pair and impedance described by this configuration."""
        from .boundary_data import ImpedanceSpec, SmoothImpedance
        from .experiments import default_setup
        from .geometry import BoundaryProfile, bump_mode
        from .textio import read_profile

        d, f, imp = self.domain, self.flux, self.impedance
        if d.profile == "file":
            profile, _ = read_profile(d.profile_file)
        elif d.profile == "flat":
            profile = BoundaryProfile.flat(d.W, d.r0, d.L)
        else:
            profile = BoundaryProfile.from_function(lambda x: d.bump_height * bump_mode(d.W, 2 * d.r0)(x), d.W, d.r0, d.L)
        sigma = None if d.sigma_a is None else (d.sigma_a, d.sigma_b)
        if imp.kind == "smooth":
            gamma = ImpedanceSpec(SmoothImpedance(imp.base, imp.amplitude, d.r0, d.W, imp.slope, 0.0),
                                  imp.gamma_bar, False, "smooth")
        else:
            gamma = ImpedanceSpec.constant(imp.gamma, imp.gamma_bar)
        return default_setup(d.W, d.H, d.r0, d.L, d.M, profile, f.Phi1, f.E, f.contrast, f.shape,
                             gamma, None, f.T, f.t1, sigma)


def _key_lines(text):
    """Line number of every ``key = value`` entry, keyed by ``(section, key)``."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = no
    return lines


def _convert(section, f, raw, line):
    name = f"{section}.{f.name}"
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    optional = "Optional" in kind
    if optional and raw.strip() in ("", "auto", "none", "None"):
        return None
    try:
        if "int" in kind:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigParseError(f"{name}: cannot read {raw!r} as a number", field=name, line=line) from None
    return raw.strip()


def parse_config(text, source="<string>", base_dir=None):
    """Parse INI text into an :class:`ExperimentConfig`; raises :class:`ConfigParseError`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigParseError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    blocks = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigParseError(f"unknown section [{section}]", field=section, line=lines.get((section, None)))
    for section, cls in SECTIONS.items():
        known = {f.name: f for f in fields(cls)}
        values = {}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                line = lines.get((section, key))
                if key not in known:
                    raise ConfigParseError(f"unknown key {section}.{key}", field=f"{section}.{key}", line=line)
                values[key] = _convert(section, known[key], raw, line)
        block = cls(**values)
        _validate_block(section, block, lines)
        blocks[section] = block
    cfg = ExperimentConfig(**blocks, source=source)
    _validate_cross(cfg, lines, base_dir)
    return cfg


def _fail(section, key, message, lines):
    name = f"{section}.{key}"
    raise ConfigParseError(f"{name}: {message}", field=name, line=lines.get((section, key)))


def _validate_block(section, block, lines):
    for key in _POSITIVE.get(section, ()):
        v = getattr(block, key)
        if v is not None and not v > 0:
            _fail(section, key, f"must be positive, got {v!r}", lines)
    for key in _NONNEGATIVE.get(section, ()):
        if getattr(block, key) < 0:
            _fail(section, key, f"must be nonnegative, got {getattr(block, key)!r}", lines)
    for (sec, key), choices in _CHOICES.items():
        if sec == section and getattr(block, key) not in choices:
            _fail(section, key, f"must be one of {', '.join(choices)}, got {getattr(block, key)!r}", lines)


def _validate_cross(cfg, lines, base_dir):
    d, f, s = cfg.domain, cfg.flux, cfg.solver
    if not 0.5 <= s.theta <= 1.0:
        _fail("solver", "theta", f"must lie in [0.5, 1], got {s.theta!r}", lines)
    if s.h > d.r0 / 4 * (1 + 1e-12):
        _fail("solver", "h", f"must not exceed r0/4 = {d.r0 / 4!r}, got {s.h!r}", lines)
    if not f.t1 < f.T:
        _fail("flux", "t1", f"must be below T = {f.T!r}", lines)
    steps = f.T / s.dt
    if abs(steps - round(steps)) > 1e-9 * steps:
        _fail("solver", "dt", f"T = {f.T!r} is not a multiple of dt = {s.dt!r}", lines)
    k1 = f.t1 / s.dt
    if abs(k1 - round(k1)) > 1e-9 * max(k1, 1.0):
        _fail("flux", "t1", f"t1 = {f.t1!r} is not on the time grid of dt = {s.dt!r}", lines)
    if (d.sigma_a is None) != (d.sigma_b is None):
        _fail("domain", "sigma_b" if d.sigma_b is None else "sigma_a", "sigma_a and sigma_b go together", lines)
    if d.profile == "file":
        if not d.profile_file:
            _fail("domain", "profile_file", "required when profile = file", lines)
        path = d.profile_file
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            _fail("domain", "profile_file", f"file {d.profile_file!r} not found", lines)
        object.__setattr__(d, "profile_file", path)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read configuration {path}: {exc.strerror}", field="config") from None
    return parse_config(text, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)))
