"""Experiment configuration: YAML documents, canned studies and overrides.

A config is a tree; every leaf can be overridden from the command line with
``--set section.key=value`` (the value is parsed as YAML).
"""

import copy
import itertools
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .._validation import InvalidArgumentError
from ..frontend import SliceBank, SliceSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepPoint",
    "CANNED",
    "load_config",
    "canned_config",
    "config_from_dict",
    "apply_override",
    "expand_points",
    "PAPER_SCALE",
]

CANNED = ("fig3a", "fig3b", "fig3c")
PAPER_SCALE = {"symbols": 200_000, "measurements": 10}
BROADBAND = "1pd"
EQUALIZER_KINDS = ("esn", "ffe", "fnn")


class ConfigError(InvalidArgumentError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class TransmitterConfig:
    baud_gbd: float = 32.0
    sps_sim: int = 8
    rolloff: float = 0.1
    rrc_span: int = 32
    crest_factor: float = 1.6
    mod_index: float | None = None  # None: calibrate to cspr_db
    cspr_db: float = 6.0


@dataclass
class FiberConfig:
    lengths_km: list = field(default_factory=lambda: [0.0])
    dispersion_ps_nm_km: float = 17.0
    loss_db_per_km: float = 0.2


@dataclass
class ReceiverConfig:
    pd_bandwidth_ghz: float = 40.0
    adc_bandwidth_ghz: float = 33.0
    scope_rate_gsa: float | None = None  # None: keep the simulation rate
    sps_dsp: int = 8
    broadband_bw_ghz: float = 50.0
    deskew: bool = True
    slice_bank: list = field(default_factory=list)  # [{center_ghz, bw_ghz, order}]
    subsets: list = field(default_factory=lambda: [BROADBAND])


@dataclass
class TrainingConfig:
    train_fraction: float = 0.05
    washout_symbols: int = 125
    guard_symbols: int = 16


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    symbols: int = 50_000
    measurements: int = 5
    base_seed: int = 1
    osnr_db: list = field(default_factory=lambda: [30.0])
    transmitter: TransmitterConfig = field(default_factory=TransmitterConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    equalizers: list = field(default_factory=lambda: [{"kind": "esn"}])

    def to_dict(self):
        return asdict(self)

    @property
    def bank(self):
        return SliceBank(tuple(SliceSpec.from_dict(d) for d in self.receiver.slice_bank))

    @property
    def n_train(self):
        return int(round(self.training.train_fraction * self.symbols))


_SECTIONS = {
    "transmitter": TransmitterConfig,
    "fiber": FiberConfig,
    "receiver": ReceiverConfig,
    "training": TrainingConfig,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(data).__name__}")
    known = cls.__dataclass_fields__
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is ExperimentConfig:
            value = _build(_SECTIONS[key], value or {}, key)
        kwargs[key] = value
    return cls(**kwargs)


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _normalize_subset(s, n_slices):
    if isinstance(s, str) and s.lower() in (BROADBAND, "broadband"):
        return BROADBAND
    if isinstance(s, int):
        s = [s]
    if isinstance(s, str):
        s = [int(p) for p in s.replace("+", ",").split(",") if p.strip()]
    idx = tuple(sorted(set(int(i) for i in s)))
    if not idx or idx[0] < 1 or idx[-1] > n_slices:
        raise ConfigError(f"slice subset {s!r} must reference slices 1..{n_slices}")
    return idx


def validate(cfg):
    """Check invariants and normalize list-valued fields in place."""
    def positive(value, name):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"{name} must be a positive number, got {value!r}")

    for name in ("symbols", "measurements"):
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    if isinstance(cfg.base_seed, bool) or not isinstance(cfg.base_seed, int) or cfg.base_seed < 0:
        raise ConfigError(f"base_seed must be a non-negative integer, got {cfg.base_seed!r}")
    tr = cfg.training
    if cfg.symbols < 20 * tr.washout_symbols:
        raise ConfigError(f"symbols ({cfg.symbols}) must be at least 20x the washout ({tr.washout_symbols})")
    if not 0 < tr.train_fraction < 1:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if cfg.n_train <= tr.washout_symbols:
        raise ConfigError("training prefix does not extend past the washout")
    if cfg.symbols - cfg.n_train <= tr.guard_symbols:
        raise ConfigError("no symbols left to count errors on")
    t = cfg.transmitter
    positive(t.baud_gbd, "transmitter.baud_gbd")
    positive(t.crest_factor, "transmitter.crest_factor")
    if t.mod_index is not None and not 0 < t.mod_index <= 1:
        raise ConfigError("transmitter.mod_index must lie in (0, 1] or be null")
    r = cfg.receiver
    if cfg.transmitter.sps_sim % r.sps_dsp:
        raise ConfigError("receiver.sps_dsp must divide transmitter.sps_sim")

    cfg.osnr_db = [float(v) for v in _as_list(cfg.osnr_db)]
    cfg.fiber.lengths_km = [float(v) for v in _as_list(cfg.fiber.lengths_km)]
    if not cfg.osnr_db or not cfg.fiber.lengths_km:
        raise ConfigError("osnr_db and fiber.lengths_km must be non-empty")
    if min(cfg.fiber.lengths_km) < 0:
        raise ConfigError("fiber lengths must be >= 0")
    try:
        n_slices = len(cfg.bank) if r.slice_bank else 0
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad receiver.slice_bank: {exc}") from None
    subsets = _as_list(r.subsets)
    if not subsets:
        raise ConfigError("receiver.subsets must be non-empty")
    r.subsets = [_normalize_subset(s, n_slices) for s in subsets]

    eqs = _as_list(cfg.equalizers)
    if not eqs:
        raise ConfigError("at least one equalizer is required")
    for e in eqs:
        if not isinstance(e, dict) or e.get("kind") not in EQUALIZER_KINDS:
            raise ConfigError(f"equalizer entries need kind in {EQUALIZER_KINDS}, got {e!r}")
    cfg.equalizers = eqs
    return cfg


def config_from_dict(data):
    cfg = _build(ExperimentConfig, copy.deepcopy(data or {}), "config")
    return validate(cfg)


def _read_yaml(text, source):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from None


def canned_config(name):
    if name not in CANNED:
        raise ConfigError(f"unknown canned study {name!r}; expected one of {CANNED}")
    text = resources.files(__package__).joinpath("configs", f"{name}.yaml").read_text()
    return _read_yaml(text, name) or {}


def load_config(source, overrides=()):
    """Load a config from a canned study name or a YAML path and apply overrides.

    Parameters
    ----------
    source : str or path
        ``fig3a``/``fig3b``/``fig3c`` or a path to a YAML file.
    overrides : iterable of (dotted_key, value)
        Applied in order after loading, before validation.
    """
    if str(source) in CANNED:
        data = canned_config(str(source))
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        data = _read_yaml(text, path) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    for key, value in overrides:
        apply_override(data, key, value)
    return config_from_dict(data)


def apply_override(data, dotted_key, value):
    """Set ``data[a][b]... = value`` for ``dotted_key = "a.b..."``; strings are parsed as YAML."""
    if isinstance(value, str):
        value = _read_yaml(value, dotted_key) if value.strip() else value
    keys = dotted_key.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted_key}: {k} is not a section")
    node[keys[-1]] = value
    return data


@dataclass(frozen=True)
class SweepPoint:
    """One resolved combination of the sweep axes (seed excluded)."""

    distance_km: float
    osnr_db: float
    subset: object  # "1pd" or tuple of 1-based slice indices
    equalizer: str
    params: tuple  # sorted (name, value) pairs

    @property
    def n_pds(self):
        return 1 if self.subset == BROADBAND else len(self.subset)

    @property
    def slice_set(self):
        return BROADBAND if self.subset == BROADBAND else "+".join(map(str, self.subset))

    @property
    def n_neurons(self):
        return dict(self.params).get("n_neurons") if self.equalizer == "esn" else None


def _equalizer_variants(spec):
    spec = dict(spec)
    kind = spec.pop("kind")
    names = sorted(spec)
    values = [_as_list(spec[n]) for n in names]
    for combo in itertools.product(*values):
        yield kind, tuple(zip(names, combo))


def expand_points(cfg):
    """Cartesian product of the sweep axes, in config order."""
    variants = [v for e in cfg.equalizers for v in _equalizer_variants(e)]
    if cfg.equalizers and any(e["kind"] == "esn" for e in cfg.equalizers):
        # make n_neurons explicit so records are self-describing
        variants = [
            (k, p if k != "esn" or "n_neurons" in dict(p) else tuple(sorted(p + (("n_neurons", 500),))))
            for k, p in variants
        ]
    return [
        SweepPoint(d, o, s, k, p)
        for d in cfg.fiber.lengths_km
        for o in cfg.osnr_db
        for s in cfg.receiver.subsets
        for k, p in variants
    ]
