"""Pipeline configuration: INI file sections overridden by command-line flags."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .algorithms import KMEANS_INITS, LINKAGES
from .consensus import DEFAULT_ENSEMBLE_SIZE, DEFAULT_FLATNESS_MAX, DEFAULT_RESAMPLE_FRACTION, DEFAULT_TAU
from .errors import ConfigError
from .ingestion import ORIENTATIONS
from .matrix import METRICS
from .snf import DEFAULT_ITERATIONS, DEFAULT_MU

ALGORITHMS = ("kmeans", "hier", "spectral", "snf")
# CLI algorithm names to consensus base names
BASE_NAMES = {"kmeans": "kmeans", "hier": "hierarchical", "spectral": "spectral", "snf": "snf"}


def _ints(text):
    return [int(t) for t in str(text).replace(",", " ").split()]


def parse_k_range(text):
    """``"2-6"``, ``"2..6"`` or ``"2,3,4"`` to a sorted list of ints."""
    text = str(text).strip()
    try:
        for sep in ("..", "-", ":"):
            if sep in text:
                lo, hi = (int(t) for t in text.split(sep))
                return list(range(lo, hi + 1))
        return sorted(set(_ints(text)))
    except ValueError:
        raise ConfigError(f"cannot parse k range {text!r}") from None


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _list(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


# field name -> (section, parser)
SCHEMA = {
    "inputs": ("input", _list),
    "orientation": ("input", str),
    "n_top": ("input", _ints),
    "log2": ("input", _bool),
    "standardize": ("input", _bool),
    "labels": ("input", str),
    "algorithm": ("cluster", str),
    "k": ("cluster", int),
    "k_range": ("cluster", parse_k_range),
    "linkage": ("cluster", str),
    "metric": ("cluster", str),
    "init": ("cluster", str),
    "n_init": ("cluster", int),
    "affinity_scale": ("cluster", str),
    "snf_k_neighbors": ("snf", int),
    "snf_mu": ("snf", float),
    "snf_iterations": ("snf", int),
    "ensemble_size": ("consensus", int),
    "resample_fraction": ("consensus", float),
    "feature_fraction": ("consensus", float),
    "ensemble_n_init": ("consensus", int),
    "tau": ("consensus", float),
    "flatness_max": ("consensus", float),
    "synth_k": ("synth", int),
    "synth_n_per_cluster": ("synth", int),
    "synth_dims": ("synth", int),
    "synth_separation": ("synth", float),
    "synth_views": ("synth", int),
    "synth_noise_views": ("synth", int),
    "seed": ("run", int),
    "threads": ("run", int),
    "output_dir": ("run", str),
}


@dataclass
class PipelineConfig:
    inputs: list = field(default_factory=list)
    orientation: str = "features_as_rows"
    n_top: list = field(default_factory=list)
    log2: bool = False
    standardize: bool = False
    labels: str = ""
    algorithm: str = "kmeans"
    k: int = 0
    k_range: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    linkage: str = "average"
    metric: str = "euclidean"
    init: str = "kmeanspp"
    n_init: int = 10
    affinity_scale: str = "global_median"
    snf_k_neighbors: int = 0
    snf_mu: float = DEFAULT_MU
    snf_iterations: int = DEFAULT_ITERATIONS
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE
    resample_fraction: float = DEFAULT_RESAMPLE_FRACTION
    feature_fraction: float = 1.0
    ensemble_n_init: int = 1
    tau: float = DEFAULT_TAU
    flatness_max: float = DEFAULT_FLATNESS_MAX
    synth_k: int = 4
    synth_n_per_cluster: int = 50
    synth_dims: int = 50
    synth_separation: float = 10.0
    synth_views: int = 1
    synth_noise_views: int = 0
    seed: int = 0
    threads: int = 1
    output_dir: str = "run"

    def validate(self, command):
        """Check every value needed by ``command`` before any computation."""
        if command in ("preprocess", "cluster", "consensus", "select-k") and not self.inputs:
            raise ConfigError("no input files given (use --input or [input] paths)")
        if self.orientation not in ORIENTATIONS:
            raise ConfigError(f"orientation must be one of {ORIENTATIONS}")
        if self.n_top and len(self.n_top) not in (1, len(self.inputs)):
            raise ConfigError(f"n_top needs 1 or {len(self.inputs)} values, got {len(self.n_top)}")
        if any(t < 1 for t in self.n_top):
            raise ConfigError("n_top values must be positive")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if command in ("cluster", "consensus") and self.k < 1:
            raise ConfigError("k must be given as a positive integer (--k)")
        if command == "select-k" and not self.k_range:
            raise ConfigError("k_range is empty")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"linkage must be one of {LINKAGES}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.init not in KMEANS_INITS:
            raise ConfigError(f"init must be one of {KMEANS_INITS}")
        if self.affinity_scale not in ("global_median", "local_knn"):
            raise ConfigError("affinity_scale must be global_median or local_knn")
        if self.n_init < 1 or self.ensemble_n_init < 1:
            raise ConfigError("n_init values must be positive")
        if self.snf_k_neighbors < 0 or self.snf_mu <= 0 or self.snf_iterations < 0:
            raise ConfigError("invalid SNF parameters")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be positive")
        if not 0 < self.resample_fraction <= 1 or not 0 < self.feature_fraction <= 1:
            raise ConfigError("resample_fraction and feature_fraction must lie in (0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if not self.output_dir:
            raise ConfigError("output_dir is empty")

    def n_top_for(self, index):
        if not self.n_top:
            return None
        return self.n_top[0] if len(self.n_top) == 1 else self.n_top[index]

    def to_ini(self):
        parser = configparser.ConfigParser()
        for f in fields(self):
            section, _ = SCHEMA[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, f.name)
            if isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            parser.set(section, f.name, str(value))
        return parser

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            self.to_ini().write(fh)


def load_config(path=None, overrides=None):
    """Read an INI config (if any), then apply non-None ``overrides``."""
    values = {}
    if path:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        known = {}
        for name, (section, _) in SCHEMA.items():
            known.setdefault(section, set()).add(name)
        for section in parser.sections():
            for key, raw in parser.items(section):
                if section not in known or key not in known[section]:
                    raise ConfigError(f"{path}: unknown key [{section}] {key}")
                values[key] = raw
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    cfg = PipelineConfig()
    for key, raw in values.items():
        _, parse = SCHEMA[key]
        try:
            parsed = raw if not isinstance(raw, str) else parse(raw)
        except (ValueError, TypeError):
            raise ConfigError(f"invalid value for {key}: {raw!r}") from None
        setattr(cfg, key, parsed)
    if cfg.inputs:
        cfg.inputs = [str(Path(p)) for p in cfg.inputs]
    return cfg
