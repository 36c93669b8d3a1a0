"""Flat ``key = value`` experiment configuration.

Grammar, one entry per line::

    # comment
    section.key = value        # trailing comments are allowed

Blank lines and ``#`` comments are ignored. Keys are dotted identifiers and
may appear once. List values are comma separated. Unknown keys, duplicate
keys and malformed values raise :class:`~funcar.errors.ConfigError`.

Recognised keys and defaults are listed in ``KEYS``.
"""
from dataclasses import dataclass, asdict
import math
import os
from pathlib import Path
import re
from typing import Optional

import numpy as np

from funcar.arh import ArhModel
from funcar.errors import ConfigError
from funcar.hilbert import BasisSpec, HilbertOperator

__all__ = ["ExperimentConfig", "KEYS", "parse_config", "load_config", "build_model", "SEED_ENV"]

SEED_ENV = "FUNCAR_SEED"

# key -> (default, description)
KEYS = {
    "basis.dimension": ("30", "truncation level J"),
    "basis.sobolev_order": ("0", "Sobolev order r of the state space"),
    "model.kind": ("diagonal", "diagonal | matrix"),
    "model.lambda_scale": ("1.0", "diagonal: R0 eigenvalues lambda_j = scale * j^-decay"),
    "model.lambda_decay": ("2.0", ""),
    "model.mu_scale": ("0.8", "diagonal: rho eigenvalues mu_j = scale * j^-decay"),
    "model.mu_decay": ("3.0", ""),
    "model.rotation_seed": ("none", "diagonal: rotate the eigenbasis by a Haar-random orthogonal matrix"),
    "model.rho_file": ("", "matrix: CSV file with the JxJ matrix of rho"),
    "model.noise_file": ("", "matrix: CSV file with the JxJ noise covariance"),
    "observation.regime": ("complete", "complete | sparse"),
    "observation.m": ("20", "sparse: measurements per curve"),
    "observation.noise_sd": ("0.1", "sparse: measurement error standard deviation"),
    "observation.ridge": ("auto", "sparse: stage-1 ridge weight, or auto"),
    "experiment.n_grid": ("128, 256, 512, 1024, 2048, 4096", "strictly increasing sample sizes, each >= 4"),
    "experiment.replications": ("50", ""),
    "experiment.base_seed": ("0", "replication i uses seed base_seed + i"),
    "experiment.burn_in": ("0", ""),
    "experiment.workers": ("1", "worker processes for replications"),
    "alpha.rule": ("tuned", "tuned | fixed"),
    "alpha.value": ("0.01", "fixed: the regularization parameter"),
    "alpha.c": ("1.0", "tuned: alpha_n = c * gamma_n^(1/4)"),
    "alpha.gamma": ("auto", "tuned: auto | complete | sparse (rate formula for gamma_n)"),
    "report.p_norms": ("2", "subset of 1, 2, inf"),
    "output.path": ("rates_out", "directory for rates.csv / rates.json"),
    "output.format": ("csv, json", "subset of csv, json"),
}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)+)\s*=\s*(.*?)\s*$")


def parse_config(text, source="<config>"):
    """Parse config text into a ``{key: raw_value}`` dict with defaults filled in."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _LINE.match(line)
        if not match:
            raise ConfigError(f"{source}:{lineno}: expected 'dotted.key = value', got {raw.strip()!r}")
        key, value = match.groups()
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    merged = {k: d for k, (d, _) in KEYS.items()}
    merged.update(values)
    return merged


def _int(raw, key):
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    return v


def _float(raw, key):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if math.isnan(v):
        raise ConfigError(f"{key}: NaN is not allowed")
    return v


def _list(raw):
    return [s.strip() for s in raw.split(",") if s.strip()]


def _p_value(raw, key):
    s = raw.lower()
    if s in ("inf", "infinity"):
        return math.inf
    v = _float(raw, key)
    if v not in (1.0, 2.0):
        raise ConfigError(f"{key}: Schatten index must be one of 1, 2, inf, got {raw!r}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 30
    sobolev_order: float = 0.0
    model_kind: str = "diagonal"
    lambda_scale: float = 1.0
    lambda_decay: float = 2.0
    mu_scale: float = 0.8
    mu_decay: float = 3.0
    rotation_seed: Optional[int] = None
    rho_file: str = ""
    noise_file: str = ""
    regime: str = "complete"
    m: int = 20
    noise_sd: float = 0.1
    ridge: Optional[float] = None
    n_grid: tuple = (128, 256, 512, 1024, 2048, 4096)
    replications: int = 50
    base_seed: int = 0
    burn_in: int = 0
    workers: int = 1
    alpha_rule: str = "tuned"
    alpha_value: float = 0.01
    alpha_c: float = 1.0
    alpha_gamma: str = "auto"
    p_norms: tuple = (2.0,)
    output_path: str = "rates_out"
    output_formats: tuple = ("csv", "json")

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("basis.dimension must be positive")
        if self.sobolev_order < 0:
            raise ConfigError("basis.sobolev_order must be nonnegative")
        if self.model_kind not in ("diagonal", "matrix"):
            raise ConfigError(f"model.kind must be diagonal or matrix, got {self.model_kind!r}")
        if self.model_kind == "matrix" and not (self.rho_file and self.noise_file):
            raise ConfigError("model.kind = matrix needs model.rho_file and model.noise_file")
        if self.regime not in ("complete", "sparse"):
            raise ConfigError(f"observation.regime must be complete or sparse, got {self.regime!r}")
        if self.m < 1:
            raise ConfigError("observation.m must be >= 1")
        if self.noise_sd < 0:
            raise ConfigError("observation.noise_sd must be nonnegative")
        if self.ridge is not None and not self.ridge > 0:
            raise ConfigError("observation.ridge must be positive or auto")
        grid = tuple(self.n_grid)
        if not grid or any(n < 4 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"experiment.n_grid must be strictly increasing with every n >= 4, got {grid}")
        if self.replications < 1:
            raise ConfigError("experiment.replications must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("experiment.base_seed must be nonnegative")
        if self.burn_in < 0:
            raise ConfigError("experiment.burn_in must be nonnegative")
        if self.workers < 1:
            raise ConfigError("experiment.workers must be >= 1")
        if self.alpha_rule not in ("tuned", "fixed"):
            raise ConfigError(f"alpha.rule must be tuned or fixed, got {self.alpha_rule!r}")
        if not self.alpha_value > 0 or not self.alpha_c > 0:
            raise ConfigError("alpha.value and alpha.c must be positive")
        if self.alpha_gamma not in ("auto", "complete", "sparse"):
            raise ConfigError(f"alpha.gamma must be auto, complete or sparse, got {self.alpha_gamma!r}")
        if self.alpha_rule == "tuned" and self.gamma_regime == "sparse" and not self.sobolev_order > 1:
            raise ConfigError("the sparse rate formula needs basis.sobolev_order > 1")
        if not self.p_norms:
            raise ConfigError("report.p_norms must not be empty")
        if not set(self.output_formats) <= {"csv", "json"} or not self.output_formats:
            raise ConfigError(f"output.format must be a subset of csv, json, got {self.output_formats}")

    @property
    def gamma_regime(self):
        return self.regime if self.alpha_gamma == "auto" else self.alpha_gamma

    @property
    def basis(self):
        return BasisSpec(self.dimension, self.sobolev_order)

    @classmethod
    def from_mapping(cls, raw, source="<config>", base_dir=None):
        """Build from the dict returned by :func:`parse_config`."""
        def opt_int(key):
            s = raw[key].strip().lower()
            return None if s in ("", "none") else _int(raw[key], key)

        ridge_raw = raw["observation.ridge"].strip().lower()
        base = Path(base_dir) if base_dir is not None else Path(".")

        def resolve(key):
            value = raw[key].strip()
            if not value:
                return ""
            p = Path(value)
            return str(p if p.is_absolute() else base / p)

        p_norms = []
        for s in _list(raw["report.p_norms"]):
            p = _p_value(s, "report.p_norms")
            if p not in p_norms:
                p_norms.append(p)
        try:
            return cls(
                dimension=_int(raw["basis.dimension"], "basis.dimension"),
                sobolev_order=_float(raw["basis.sobolev_order"], "basis.sobolev_order"),
                model_kind=raw["model.kind"].strip(),
                lambda_scale=_float(raw["model.lambda_scale"], "model.lambda_scale"),
                lambda_decay=_float(raw["model.lambda_decay"], "model.lambda_decay"),
                mu_scale=_float(raw["model.mu_scale"], "model.mu_scale"),
                mu_decay=_float(raw["model.mu_decay"], "model.mu_decay"),
                rotation_seed=opt_int("model.rotation_seed"),
                rho_file=resolve("model.rho_file"),
                noise_file=resolve("model.noise_file"),
                regime=raw["observation.regime"].strip(),
                m=_int(raw["observation.m"], "observation.m"),
                noise_sd=_float(raw["observation.noise_sd"], "observation.noise_sd"),
                ridge=None if ridge_raw == "auto" else _float(raw["observation.ridge"], "observation.ridge"),
                n_grid=tuple(_int(s, "experiment.n_grid") for s in _list(raw["experiment.n_grid"])),
                replications=_int(raw["experiment.replications"], "experiment.replications"),
                base_seed=_int(raw["experiment.base_seed"], "experiment.base_seed"),
                burn_in=_int(raw["experiment.burn_in"], "experiment.burn_in"),
                workers=_int(raw["experiment.workers"], "experiment.workers"),
                alpha_rule=raw["alpha.rule"].strip(),
                alpha_value=_float(raw["alpha.value"], "alpha.value"),
                alpha_c=_float(raw["alpha.c"], "alpha.c"),
                alpha_gamma=raw["alpha.gamma"].strip(),
                p_norms=tuple(p_norms),
                output_path=raw["output.path"].strip(),
                output_formats=tuple(_list(raw["output.format"])),
            )
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    def to_dict(self):
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        d["p_norms"] = [_p_label(p) for p in self.p_norms]
        d["output_formats"] = list(self.output_formats)
        return d

    def with_overrides(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ExperimentConfig(**d)


def _p_label(p):
    return "inf" if math.isinf(p) else str(int(p))


def load_config(path, env=None):
    """Read a config file; ``FUNCAR_SEED`` in ``env`` overrides the base seed."""
    env = os.environ if env is None else env
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw = parse_config(text, source=str(path))
    if env.get(SEED_ENV, "").strip():
        raw["experiment.base_seed"] = env[SEED_ENV].strip()
    return ExperimentConfig.from_mapping(raw, source=str(path), base_dir=Path(path).parent)


def _read_matrix(path, J, what):
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {what} matrix from {path}: {exc}") from None
    if a.shape != (J, J):
        raise ConfigError(f"{what} matrix in {path} has shape {a.shape}, expected ({J}, {J})")
    return a


def haar_orthogonal(J, seed):
    """Haar-distributed orthogonal matrix from QR of a Gaussian matrix."""
    from funcar.arh import make_rng

    z = make_rng(seed, stream=7).standard_normal((J, J))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def build_model(cfg):
    """The :class:`ArhModel` described by a config."""
    basis = cfg.basis
    J = basis.dimension
    try:
        if cfg.model_kind == "diagonal":
            j = np.arange(1, J + 1, dtype=float)
            lam = cfg.lambda_scale * j ** (-cfg.lambda_decay)
            mu = cfg.mu_scale * j ** (-cfg.mu_decay)
            rot = None if cfg.rotation_seed is None else haar_orthogonal(J, cfg.rotation_seed)
            return ArhModel.diagonal(basis, lam, mu, rotation=rot)
        rho = _read_matrix(cfg.rho_file, J, "rho")
        noise = _read_matrix(cfg.noise_file, J, "noise covariance")
        if np.max(np.abs(noise - noise.T)) > 1e-10 * max(1.0, np.max(np.abs(noise))):
            raise ConfigError(f"noise covariance in {cfg.noise_file} is not symmetric")
        return ArhModel(basis, HilbertOperator(rho, basis), HilbertOperator.symmetrized(noise, basis))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from None
