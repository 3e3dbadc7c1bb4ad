"""INI-style configuration files.

Four sections, all optional except ``[problem]``::

    [problem]
    kind = quadratic           # quadratic | pseudo_huber | softplus
    N = 10
    n = 2
    a = geometric:1,16         # per-block curvature (quadratic)
    b = gaussian:3             # per-block linear term, shape (N, n)
    lipschitz_multiplier = 1
    x0 = gaussian:7            # projected onto S

    [solver]
    max_iters = 1000
    seed = 0

    [experiment]
    replicas = 1000
    iters = 500                # or "auto": ceil(K) from the complexity formula
    checkpoints = 0,1,2,5,10,20,50,100,200,500
    eps_rel = 0.1              # eps = eps_rel * gap0 (or give eps directly)
    rho = 0.1

    [bounds]
    k_max = 100
    R_sq = 2.5                 # manual overrides of the analytic values
    tilde_R_sq = 1.0
    mu_f = 0.5
    f_star = -3.0

Value rules for parameter arrays: ``constant:v``, ``geometric:lo,hi``
(``N`` log-spaced values from lo to hi), ``gaussian:seed[,scale]`` or an
explicit comma-separated list.  Unknown keys are errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .problem import InvalidInputError, ProblemFamilySpec, project_to_S

DEFAULT_CHECKPOINTS = (0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)

_KEYS = {
    "problem": {"kind", "n", "N", "a", "b", "w", "c", "lipschitz_multiplier", "lipschitz", "x0"},
    "solver": {"max_iters", "gap_tol", "residual_tol", "record_stride", "seed"},
    "experiment": {"replicas", "iters", "seed", "checkpoints", "eps", "eps_rel", "rho",
                   "workers"},
    "bounds": {"k_max", "R_sq", "tilde_R_sq", "mu_f", "f_star"},
}


class ConfigError(ValueError):
    pass


def parse_values(text, count, positive=False, seed_offset=0):
    """Expand a value rule into ``count`` floats."""
    text = text.strip()
    rule, _, args = text.partition(":")
    rule = rule.strip().lower()
    try:
        if rule == "constant":
            values = np.full(count, float(args))
        elif rule == "geometric":
            lo, hi = (float(v) for v in args.split(","))
            if lo <= 0 or hi <= 0:
                raise ConfigError("geometric rule needs positive endpoints")
            values = np.geomspace(lo, hi, count)
        elif rule == "gaussian":
            parts = [p.strip() for p in args.split(",")]
            scale = float(parts[1]) if len(parts) > 1 else 1.0
            rng = np.random.default_rng(int(parts[0]) + seed_offset)
            values = scale * rng.standard_normal(count)
        else:
            values = np.array([float(v) for v in text.replace(",", " ").split()])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"cannot parse value rule {text!r}: {exc}") from exc
    if values.size != count:
        raise ConfigError(f"rule {text!r} gives {values.size} values, expected {count}")
    if positive and np.any(values <= 0):
        raise ConfigError(f"rule {text!r} must give positive values")
    return values


def parse_int_list(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected a list of integers, got {text!r}") from exc


@dataclass
class SolverConfig:
    max_iters: int = 1000
    gap_tol: float | None = None
    residual_tol: float | None = None
    record_stride: int | None = None
    seed: int = 0


@dataclass
class ExperimentConfig:
    """Monte Carlo replica set.  ``iters=None`` means ``ceil(K)`` from the
    convex high-probability complexity (needs ``eps``/``eps_rel`` and ``rho``).
    """

    problem: ProblemFamilySpec
    x0: np.ndarray
    replicas: int = 1000
    iters: int | None = 500
    seed: int = 0
    checkpoints: tuple | None = None
    eps: float | None = None
    eps_rel: float | None = None
    rho: float | None = None
    R_sq: float | None = None
    tilde_R_sq: float | None = None
    mu_f: float | None = None
    f_star: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.iters is not None and self.iters < 1:
            raise ConfigError("iters must be >= 1")
        if self.eps is not None and self.eps_rel is not None:
            raise ConfigError("give eps or eps_rel, not both")
        if (self.eps is None and self.eps_rel is None) != (self.rho is None):
            raise ConfigError("the high-probability experiment needs both eps and rho")
        if self.rho is not None and not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.iters is None and self.rho is None:
            raise ConfigError("iters = auto needs eps and rho")
        if self.checkpoints is not None and self.iters is not None:
            bad = [k for k in self.checkpoints if not 0 <= k <= self.iters]
            if bad:
                raise ConfigError(f"checkpoints {bad} outside [0, {self.iters}]")

    @property
    def high_probability(self):
        return self.rho is not None


@dataclass
class Config:
    problem: ProblemFamilySpec
    x0: np.ndarray
    solver: SolverConfig = field(default_factory=SolverConfig)
    experiment: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    def experiment_config(self, **overrides) -> ExperimentConfig:
        kw = dict(self.experiment)
        kw.update({k: v for k, v in self.bounds.items() if k != "k_max"})
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(problem=self.problem, x0=self.x0, **kw)


def _num(section, key, cast=float):
    raw = section[key].strip()
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from exc


def _problem(sec):
    if "kind" not in sec or "N" not in sec or "n" not in sec:
        raise ConfigError("[problem] needs kind, N and n")
    kind = sec["kind"].strip()
    N, n = _num(sec, "N", int), _num(sec, "n", int)
    kw = {}
    for name, per_block, positive in (("a", True, True), ("w", True, True),
                                      ("b", False, False), ("c", False, False)):
        if name in sec:
            count = N if per_block else N * n
            kw[name] = parse_values(sec[name], count, positive=positive)
            if not per_block:
                kw[name] = kw[name].reshape(N, n)
    if "lipschitz_multiplier" in sec:
        kw["lipschitz_multiplier"] = _num(sec, "lipschitz_multiplier")
    if "lipschitz" in sec:
        kw["lipschitz"] = parse_values(sec["lipschitz"], N, positive=True)
    try:
        spec = ProblemFamilySpec(kind, N, n, **kw)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    x0 = parse_values(sec.get("x0", "gaussian:0"), N * n)
    return spec, project_to_S(x0, N)


def load_config(source) -> Config:
    """Parse a config file path (or the text itself, if it contains a newline)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                       interpolation=None)
    parser.optionxform = str
    text = source if isinstance(source, str) and "\n" in source else None
    try:
        if text is not None:
            parser.read_string(text)
        else:
            path = Path(source)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    for name in parser.sections():
        if name not in _KEYS:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(parser[name]) - _KEYS[name]
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    if "problem" not in parser:
        raise ConfigError("missing [problem] section")
    spec, x0 = _problem(parser["problem"])

    solver = SolverConfig()
    if "solver" in parser:
        sec = parser["solver"]
        for key, cast in (("max_iters", int), ("gap_tol", float), ("residual_tol", float),
                          ("record_stride", int), ("seed", int)):
            if key in sec:
                solver = replace(solver, **{key: _num(sec, key, cast)})

    experiment = {}
    if "experiment" in parser:
        sec = parser["experiment"]
        for key, cast in (("replicas", int), ("seed", int), ("eps", float),
                          ("eps_rel", float), ("rho", float), ("workers", int)):
            if key in sec:
                experiment[key] = _num(sec, key, cast)
        if "iters" in sec:
            experiment["iters"] = None if sec["iters"].strip() == "auto" else _num(sec, "iters", int)
        if "checkpoints" in sec:
            experiment["checkpoints"] = parse_int_list(sec["checkpoints"])

    bounds = {}
    if "bounds" in parser:
        sec = parser["bounds"]
        for key in ("R_sq", "tilde_R_sq", "mu_f", "f_star"):
            if key in sec:
                bounds[key] = _num(sec, key)
        if "k_max" in sec:
            bounds["k_max"] = _num(sec, "k_max", int)
    return Config(spec, x0, solver, experiment, bounds)
