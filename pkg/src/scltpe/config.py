"""Experiment configuration: flat ``key = value`` files plus command-line overrides.

Values are layered, later layers winning:

1. field defaults,
2. the scale preset (``paper`` or ``desk``) for epochs, budget and replicas,
3. the dataset preset (``preset = gl0``) for widths, batch size and the reference tau,
4. keys given explicitly in the file,
5. command-line overrides.

A field set at layer 4 or 5 is never overwritten by a preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import resolve_path
from .exceptions import ConfigError
from .pipeline import PipelineConfig
from .resample import SAMPLERS
from .scl import LOSS_KINDS

HPO_KINDS = ("tpe", "grid", "random", "ga", "fixed")
SCALE_PRESETS = {
    "paper": {"contrastive_epochs": 5000, "T": 75, "replicas": 10},
    "desk": {"contrastive_epochs": 1000, "T": 20, "replicas": 5},
}


@dataclass(frozen=True)
class DatasetPreset:
    name: str
    encoder_widths: tuple[int, ...]
    classifier_widths: tuple[int, ...]
    batch_size: int
    reported_tau: float


def _p(name, enc, head, batch, tau):
    return DatasetPreset(name, enc, head, batch, tau)


# Layer widths, batch sizes and the temperature reported for each benchmark.
# lym lists a head input of 62 against an encoder output of 64; 64 is used
# so that the two networks connect.
DATASET_PRESETS = {
    "gl0": _p("Glass0", (9, 96, 48), (48, 24, 2), 160, 0.514),
    "eo2": _p("Ecoli2", (7, 96, 48), (48, 10, 2), 128, 0.489),
    "yt3": _p("Yeast3", (8, 128, 64), (64, 32, 2), 240, 0.857),
    "yt6": _p("Yeast6", (8, 96, 48), (48, 24, 2), 320, 0.947),
    "vw0": _p("Vowel0", (13, 104, 52), (52, 26, 2), 160, 0.010),
    "hb": _p("Haberman", (3, 96, 48), (48, 24, 2), 128, 0.153),
    "yt24": _p("Yeast24", (8, 128, 64), (64, 32, 2), 128, 0.245),
    "pa0": _p("Pageblock0", (10, 128, 64), (64, 32, 2), 160, 0.348),
    "bal": _p("Scale Balance", (4, 128, 64), (64, 32, 3), 128, 0.995),
    "wine": _p("Wine", (13, 200, 100), (100, 50, 3), 150, 0.055),
    "lym": _p("lymphography", (18, 128, 64), (64, 32, 4), 150, 0.854),
    "gla": _p("Glass", (9, 128, 64), (64, 32, 6), 128, 0.352),
    "page": _p("Pageblocks", (10, 128, 64), (64, 32, 5), 128, 0.122),
    "dt": _p("Dermatology", (34, 128, 64), (64, 32, 6), 128, 0.116),
    "pb": _p("Penbased", (16, 128, 64), (64, 32, 10), 160, 0.059),
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "glass0"
    format: str | None = None
    preset: str | None = None
    scale_preset: str = "paper"
    test_fraction: float = 0.2
    tune_split: str = "test"
    encoder_widths: tuple[int, ...] = (9, 96, 48)
    classifier_widths: tuple[int, ...] = (48, 24, 2)
    batch_size: int = 160
    contrastive_epochs: int = 5000
    classifier_epochs: int = 25
    steps_per_epoch: int = 1
    lr: float = 0.001
    sigma: float = 0.1
    loss_kind: str = "supervised"
    normalize_output: bool = True
    raw_features: bool = False
    hpo: str = "tpe"
    tau: float = 0.5
    T: int = 75
    bounds: tuple[float, float] = (0.01, 1.0)
    grid_step: float = 0.02
    grid_bounds: tuple[float, float] = (0.02, 1.0)
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    log_scale: bool = False
    ga_population: int = 15
    ga_generations: int = 5
    seed: int = 0
    replicas: int = 10
    samplers: tuple[str, ...] = SAMPLERS
    knn_k: int = 5
    smote_k: int = 5
    # keys the user set explicitly; presets leave these alone
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    # ------------------------------------------------------------------
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            encoder_widths=self.encoder_widths,
            classifier_widths=self.classifier_widths,
            batch_size=self.batch_size,
            contrastive_epochs=self.contrastive_epochs,
            classifier_epochs=self.classifier_epochs,
            lr=self.lr,
            sigma=self.sigma,
            loss_kind=self.loss_kind,
            normalize_output=self.normalize_output,
            steps_per_epoch=self.steps_per_epoch,
            raw_features=self.raw_features,
        )

    def dataset_path(self) -> Path:
        try:
            return resolve_path(self.dataset)
        except FileNotFoundError:
            raise ConfigError(f"dataset: no file {self.dataset!r} and no bundled dataset of that name")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "explicit":
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def validate(self, ds=None):
        """Raise ConfigError naming the first offending field."""
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.scale_preset not in SCALE_PRESETS:
            bad("scale_preset", f"must be one of {sorted(SCALE_PRESETS)}")
        if self.preset is not None and self.preset not in DATASET_PRESETS:
            bad("preset", f"unknown preset {self.preset!r}; known: {sorted(DATASET_PRESETS)}")
        if not 0.0 < self.test_fraction < 1.0:
            bad("test_fraction", "must lie in (0, 1)")
        if self.tune_split not in ("test", "validation"):
            bad("tune_split", "must be 'test' or 'validation'")
        # epoch counts may be 0 (an untrained smoke run); every other count is >= 1
        for name in ("classifier_epochs", "contrastive_epochs"):
            if getattr(self, name) < 0:
                bad(name, f"must be >= 0, got {getattr(self, name)}")
        for name in ("batch_size", "steps_per_epoch", "T",
                     "replicas", "knn_k", "smote_k", "n_candidates", "ga_population", "ga_generations"):
            if getattr(self, name) < 1:
                bad(name, f"must be >= 1, got {getattr(self, name)}")
        if self.batch_size < 2:
            bad("batch_size", "must be >= 2")
        if self.ga_population < 2:
            bad("ga_population", "must be >= 2")
        if self.n_startup < 0:
            bad("n_startup", "must be >= 0")
        for name in ("encoder_widths", "classifier_widths"):
            w = getattr(self, name)
            if not w or min(w) < 1:
                bad(name, f"all widths must be >= 1, got {list(w)}")
        if len(self.classifier_widths) < 2:
            bad("classifier_widths", "needs at least an input and an output width")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            bad("lr", "must be a positive finite number")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            bad("sigma", "must be a non-negative finite number")
        if self.loss_kind not in LOSS_KINDS:
            bad("loss_kind", f"must be one of {LOSS_KINDS}")
        if self.hpo not in HPO_KINDS:
            bad("hpo", f"must be one of {HPO_KINDS}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            bad("tau", "must be a positive finite number")
        for name in ("bounds", "grid_bounds"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo < hi and math.isfinite(hi)):
                bad(name, f"need 0 < lo < hi, got {(lo, hi)}")
        if not self.grid_step > 0:
            bad("grid_step", "must be positive")
        if not 0.0 < self.gamma < 1.0:
            bad("gamma", "must lie in (0, 1)")
        for s in self.samplers:
            if s not in SAMPLERS:
                bad("samplers", f"unknown sampler {s!r}; known: {SAMPLERS}")
        if not self.raw_features and self.encoder_widths[-1] != self.classifier_widths[0]:
            bad("classifier_widths", f"first width {self.classifier_widths[0]} must equal the encoder "
                                     f"output width {self.encoder_widths[-1]}")
        if ds is not None:
            if not self.raw_features and self.encoder_widths[0] != ds.d:
                bad("encoder_widths", f"first width {self.encoder_widths[0]} but the dataset has "
                                      f"{ds.d} features")
            if self.classifier_widths[-1] != ds.n_classes:
                bad("classifier_widths", f"last width {self.classifier_widths[-1]} but the dataset has "
                                         f"{ds.n_classes} classes")
            if ds.n < 2:
                bad("dataset", "needs at least two rows")
            if self.knn_k > ds.n:
                bad("knn_k", f"exceeds the dataset size {ds.n}")


# ----------------------------------------------------------------------
# parsing

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig) if f.name != "explicit"}
_ALIASES = {"loss": "loss_kind", "r": "replicas", "budget": "T", "t": "T"}


def _canonical(key: str) -> str:
    k = key.strip().replace("-", "_")
    k = _ALIASES.get(k.lower(), k)
    if k not in _FIELD_TYPES:
        raise ConfigError(f"{key}: unknown configuration key")
    return k


def _parse_bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _split_list(text):
    return [t for t in text.replace("(", " ").replace(")", " ").replace(",", " ").split() if t]


def parse_value(key: str, text):
    """Convert the string ``text`` to the type of field ``key``."""
    key = _canonical(key)
    if not isinstance(text, str):
        return key, text
    typ = str(_FIELD_TYPES[key])
    if "None" in typ and text.strip().lower() in ("", "none"):
        return key, None
    try:
        if typ == "bool":
            return key, _parse_bool(key, text)
        if typ == "int":
            return key, int(text)
        if typ == "float":
            return key, float(text)
        if "tuple[int" in typ:
            return key, tuple(int(t) for t in _split_list(text))
        if "tuple[float" in typ:
            vals = tuple(float(t) for t in _split_list(text))
            if len(vals) != 2:
                raise ConfigError(f"{key}: expected two numbers, got {text!r}")
            return key, vals
        if "tuple[str" in typ:
            return key, tuple(t.lower() for t in _split_list(text))
        value = text.strip()
        if key in ("hpo", "loss_kind", "scale_preset", "tune_split", "preset", "format"):
            value = value.lower()
        return key, value
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, parsed = parse_value(key, value)
        values[key] = parsed
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Layer defaults, presets, file values and overrides into a config."""
    explicit = {}
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            if v is None:
                continue
            key, val = parse_value(k, v)
            explicit[key] = val
    cfg = ExperimentConfig()
    scale = explicit.get("scale_preset", cfg.scale_preset)
    if scale not in SCALE_PRESETS:
        raise ConfigError(f"scale_preset: must be one of {sorted(SCALE_PRESETS)}, got {scale!r}")
    layered = dict(SCALE_PRESETS[scale])
    preset = explicit.get("preset")
    if preset is not None:
        if preset not in DATASET_PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; known: {sorted(DATASET_PRESETS)}")
        p = DATASET_PRESETS[preset]
        layered.update(encoder_widths=p.encoder_widths, classifier_widths=p.classifier_widths,
                       batch_size=p.batch_size, tau=p.reported_tau)
    layered.update(explicit)
    return replace(cfg, **layered, explicit=frozenset(explicit))


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    return build_config(read_config_file(path) if path else {}, overrides)


def write_config(cfg: ExperimentConfig, path):
    """Write every field as ``key = value`` so the file reproduces ``cfg``."""
    lines = []
    for k, v in cfg.to_dict().items():
        if v is None:
            v = "none"
        elif isinstance(v, list):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")
