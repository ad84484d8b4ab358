"""Run configuration: one JSON document, unknown keys rejected.

Schema (all keys optional unless noted, defaults shown)::

    {
      "seed": 0,
      "H": 64,                          # image side, divisible by 32
      "mode": "multistage",             # | "image_based" | "patch_based"
      "init_strategy": "nearest",       # | "random" | "bilinear" | "remove"
      "patch_norm": "l2",               # | "squared"
      "output_dir": "runs/default",
      "sample_every": 0,                # iterations between sample sheets, 0 = off
      "n_samples": 16,
      "budget_seconds": null,           # total wall-clock budget, split evenly over stages
      "profile_iters": 50,
      "dataset": {"source": "procedural", "n": 256, "seed": 0, "path": null},
      "generator": {"z_dim": 128, "w_dim": 64, "width": 128, "depth": 6,
                    "embed_pairs": 64, "fourier_sigma": 10.0, "const_dim": 32,
                    "slope": 0.2},
      "discriminator": {"channels": [32, 64, 128], "kernel": 4, "slope": 0.2,
                        "policy": "carry"},
      "optim": {"lr": 0.002, "beta1": 0.0, "beta2": 0.99, "eps": 1e-8},
      "stages": [                       # exactly 3 for multistage, 1 otherwise
        {"iters": 100, "batch": 8, "lambda_patch": 0.0, "crop_side": null,
         "d_reg_weight": 1.0, "d_reg_every": 4, "d_reg_eps": 0.05},
        ...
      ]
    }
"""
from dataclasses import dataclass, field, asdict, fields
import json

from .discriminator import DiscConfig
from .generator import GeneratorConfig, STRATEGIES

MODES = ("multistage", "image_based", "patch_based")


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    source: str = "procedural"
    n: int = 256
    seed: int = 0
    path: str = None


@dataclass
class OptimConfig:
    lr: float = 2e-3
    beta1: float = 0.0
    beta2: float = 0.99
    eps: float = 1e-8


@dataclass
class StageConfig:
    stage: int = 1
    iters: int = 100
    batch: int = 8
    lambda_patch: float = None
    crop_side: int = None
    d_reg_weight: float = 1.0
    d_reg_every: int = 4
    d_reg_eps: float = 0.05

    def __post_init__(self):
        if self.lambda_patch is None:
            self.lambda_patch = 0.0 if self.stage == 1 else 1.0


@dataclass
class RunConfig:
    seed: int = 0
    H: int = 64
    mode: str = "multistage"
    init_strategy: str = "nearest"
    patch_norm: str = "l2"
    output_dir: str = "runs/default"
    sample_every: int = 0
    n_samples: int = 16
    budget_seconds: float = None
    profile_iters: int = 50
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscConfig = field(default_factory=DiscConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    stages: list = field(default_factory=lambda: [StageConfig(stage=i) for i in (1, 2, 3)])

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def patch_side(self):
        return self.H // 4


_NESTED = {"dataset": DatasetConfig, "generator": GeneratorConfig,
           "discriminator": DiscConfig, "optim": OptimConfig}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if cls is RunConfig and k in _NESTED:
            v = _build(_NESTED[k], v, f"{where}.{k}")
        elif cls is RunConfig and k == "stages":
            if not isinstance(v, list):
                raise ConfigError(f"{where}.stages: expected a list")
            built = []
            for i, s in enumerate(v):
                s = dict(s) if isinstance(s, dict) else s
                if isinstance(s, dict):
                    if data.get("mode", "multistage") == "multistage":
                        s.setdefault("stage", i + 1)
                    else:
                        s.setdefault("stage", 3)
                        s.setdefault("lambda_patch", 0.0)
                built.append(_build(StageConfig, s, f"{where}.stages[{i}]"))
            v = built
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def _int_field(value, where, minimum=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")


def validate(cfg):
    _int_field(cfg.seed, "seed", 0)
    _int_field(cfg.H, "H", 32)
    if cfg.H % 32:
        raise ConfigError(f"H: must be divisible by 32 (patch side H/4 passes three stride-2 convs), got {cfg.H}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {cfg.mode!r}")
    if cfg.init_strategy not in STRATEGIES:
        raise ConfigError(f"init_strategy: expected one of {STRATEGIES}, got {cfg.init_strategy!r}")
    if cfg.patch_norm not in ("l2", "squared"):
        raise ConfigError(f"patch_norm: expected 'l2' or 'squared', got {cfg.patch_norm!r}")
    if cfg.discriminator.policy not in ("carry", "reset"):
        raise ConfigError(f"discriminator.policy: expected 'carry' or 'reset', got {cfg.discriminator.policy!r}")
    if cfg.dataset.source not in ("procedural", "folder"):
        raise ConfigError(f"dataset.source: expected 'procedural' or 'folder', got {cfg.dataset.source!r}")
    if cfg.dataset.source == "folder" and not cfg.dataset.path:
        raise ConfigError("dataset.path: required when source is 'folder'")
    _int_field(cfg.dataset.n, "dataset.n", 1)
    _int_field(cfg.sample_every, "sample_every", 0)
    _int_field(cfg.n_samples, "n_samples", 1)
    _int_field(cfg.profile_iters, "profile_iters", 1)
    if cfg.budget_seconds is not None and cfg.budget_seconds <= 0:
        raise ConfigError("budget_seconds: must be positive")
    for name in ("z_dim", "w_dim", "width", "depth", "embed_pairs", "const_dim"):
        _int_field(getattr(cfg.generator, name), f"generator.{name}", 1)
    want = 3 if cfg.mode == "multistage" else 1
    if len(cfg.stages) != want:
        raise ConfigError(f"stages: mode {cfg.mode} needs exactly {want} stage config(s), got {len(cfg.stages)}")
    for i, s in enumerate(cfg.stages):
        where = f"stages[{i}]"
        expected = i + 1 if cfg.mode == "multistage" else 3
        if s.stage != expected:
            raise ConfigError(f"{where}.stage: expected {expected}, got {s.stage}")
        _int_field(s.iters, f"{where}.iters", 0)
        _int_field(s.batch, f"{where}.batch", 1)
        _int_field(s.d_reg_every, f"{where}.d_reg_every", 1)
        if s.d_reg_eps <= 0:
            raise ConfigError(f"{where}.d_reg_eps: must be positive")
        if cfg.mode == "multistage" and s.stage == 1 and s.lambda_patch != 0:
            raise ConfigError(f"{where}.lambda_patch: stage 1 has no previous stage, must be 0")
        if cfg.mode != "multistage" and s.lambda_patch != 0:
            raise ConfigError(f"{where}.lambda_patch: baselines have no patch regularizer, must be 0")
        if s.crop_side is not None and s.crop_side != cfg.H // 4:
            raise ConfigError(f"{where}.crop_side: the discriminator input is fixed at H/4={cfg.H // 4}")
    return cfg


def from_dict(data):
    return validate(_build(RunConfig, data, "config"))


def loads(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e})") from None
    return from_dict(data)


def load(path):
    with open(path) as f:
        return loads(f.read())


def baseline_config(cfg, mode):
    """Single-stage config for a baseline mode derived from a multistage one."""
    d = cfg.to_dict()
    total = sum(s["iters"] for s in d["stages"])
    first = dict(d["stages"][0])
    first.update(stage=3, iters=total, lambda_patch=0.0)
    d["mode"] = mode
    d["stages"] = [first]
    return from_dict(d)
