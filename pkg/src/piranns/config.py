"""INI run configuration with a fixed schema (unknown sections or keys are errors)."""

import configparser
from dataclasses import dataclass, field

from piranns.adaptivity import AdaptiveConfig, SolverSettings
from piranns.assembly import CollocationPlan, PenaltyWeights
from piranns.linalg import LMConfig

PROBLEMS = ("helmholtz", "bump", "lshape", "burgers")


class ConfigError(ValueError):
    """Schema violation; ``problems`` lists every diagnostic found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _choice(*options):
    def parse(text):
        if text.strip() not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text.strip()
    return parse


def _opt_str(text):
    return text.strip() or None


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "problem": (_choice(*PROBLEMS), None),
        "k": (float, 16.0),
        "nu": (float, 0.01 / 3.141592653589793),
        "dim": (int, 2),
        "sharpness": (float, 1000.0),
        "n_features": (int, 100),
        "m": (float, 2.0),
        "m_values": (_floats, [0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0]),
        "r_scale": (float, 1.0),
        "sampler": (_choice("uniform", "stratified"), "uniform"),
        "feature_mode": (_choice("shared", "independent"), "shared"),
        "grid": (_ints, None),
        "seeds": (_ints, [0]),
        "reference": (_opt_str, None),
    },
    "collocation": {
        "interior_per_element": (int, None),
        "per_face": (int, None),
        "placement": (_choice("tensor", "random"), "tensor"),
        "jitter": (float, 0.5),
        "plain_sums": (_bool, False),
    },
    "penalties": {
        "lambda_boundary": (float, 100.0),
        "lambda_iface_l2": (float, 100.0),
        "lambda_iface_h1": (float, 10.0),
        "flux_jump": (_bool, True),
    },
    "adaptive": {
        "theta": (float, 0.7),
        "tol": (_opt_float, None),
        "max_iters": (int, 6),
        "beta": (_opt_float, None),
        "beta_boundary": (_opt_float, None),
        "quad_per_axis": (int, 16),
        "max_leaves": (int, 4096),
        "n_test": (int, 10_000),
        "error_seed": (int, 0),
    },
    "solver": {
        "method": (_choice("svd", "qr"), "svd"),
        "rcond": (float, 1e-12),
        "lm_max_iter": (int, 200),
        "lm_tol_grad": (float, 1e-10),
        "lm_tol_step": (float, 1e-12),
        "lm_tol_fun": (float, 0.0),
        "lm_damping0": (float, 1e-3),
    },
    "oracle": {
        "nx": (int, 512),
        "cfl": (float, 0.2),
    },
}

DEFAULT_GRID = {"helmholtz": [1], "bump": [4], "lshape": [4], "burgers": [2]}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def problem(self):
        return self["run.problem"]

    @property
    def seeds(self):
        return list(self["run.seeds"])

    def grid(self):
        g = self["run.grid"] or DEFAULT_GRID[self.problem]
        dim = self.dim
        if len(g) == 1:
            g = g * dim
        if len(g) != dim:
            raise ConfigError([f"run.grid has {len(g)} entries for a {dim}-d problem"])
        return tuple(g)

    @property
    def dim(self):
        return self["run.dim"] if self.problem == "bump" else 2

    def plan(self):
        c = self.values["collocation"]
        return CollocationPlan(c["interior_per_element"], c["per_face"], c["placement"], c["jitter"],
                               0, c["plain_sums"])

    def penalties(self):
        return PenaltyWeights(**self.values["penalties"])

    def adaptive(self):
        return AdaptiveConfig(**self.values["adaptive"])

    def solver(self):
        s = self.values["solver"]
        lm = LMConfig(max_iter=s["lm_max_iter"], tol_grad=s["lm_tol_grad"], tol_step=s["lm_tol_step"],
                      damping0=s["lm_damping0"], tol_fun=s["lm_tol_fun"])
        return SolverSettings(self.plan(), self.penalties(), s["method"], s["rcond"], lm)

    def flat(self):
        """``section.key -> value`` for every resolved setting (the manifest echo)."""
        return {f"{s}.{k}": v for s, kv in self.values.items() for k, v in kv.items()}


def parse_config(text, overrides=None):
    """Parse INI text against :data:`SCHEMA`; raises :class:`ConfigError` listing every problem."""
    cp = configparser.ConfigParser(interpolation=None)
    problems = []
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"unreadable config: {err}"]) from None
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
                continue
            try:
                values[section][key] = SCHEMA[section][key][0](raw)
            except ValueError as err:
                problems.append(f"{section}.{key} = {raw!r}: {err}")
    for key, val in (overrides or {}).items():
        section, name = key.split(".")
        values[section][name] = val
    if values["run"]["problem"] is None:
        problems.append("run.problem is required")
    problems.extend(_check(values))
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(values)
    try:
        cfg.grid()
        cfg.adaptive()
        cfg.plan()
        cfg.penalties()
    except ValueError as err:
        raise ConfigError([str(err)]) from None
    return cfg


def _check(v):
    out = []
    run = v["run"]
    for key in ("n_features",):
        if run[key] < 1:
            out.append(f"run.{key} must be positive")
    for key in ("m", "r_scale", "k"):
        if run[key] <= 0:
            out.append(f"run.{key} must be positive")
    if any(m <= 0 for m in run["m_values"]) or list(run["m_values"]) != sorted(run["m_values"]):
        out.append("run.m_values must be positive and ascending")
    if not run["seeds"] or any(s < 0 for s in run["seeds"]):
        out.append("run.seeds must be a non-empty list of non-negative integers")
    if run["dim"] not in (2, 3):
        out.append("run.dim must be 2 or 3")
    if run["grid"] is not None and any(g < 1 for g in run["grid"]):
        out.append("run.grid entries must be positive")
    if v["oracle"]["nx"] < 64:
        out.append("oracle.nx must be at least 64")
    return out


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError([f"cannot read {path}: {err}"]) from None
    return parse_config(text, overrides)
