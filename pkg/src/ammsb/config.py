"""Flat key = value experiment configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields

ALGORITHMS = ("sgmc", "sgmc-m", "cgs", "lmc")
LOCAL_SAMPLING = ("stratified", "uniform")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str = ""
    algorithm: str = "sgmc"
    K: int = 0
    alpha: float | None = None  # defaults to 1/K
    eta: float = 1.0
    delta: float = 1e-7
    tau: float = 0.9
    kappa: float = 0.5
    tau0: float = 1024.0
    fixed_step: float | None = None
    m: int | None = None  # defaults so the non-link batch size lands near 64
    n1: int = 10
    n0: int = 10
    bulk_batch: int = 32
    local_sampling: str = "stratified"
    heldout_fraction: float = 0.01
    max_iters: int = 0
    eval_interval: int = 100
    burn_in: int = 0
    seed: int = 42
    global_update_fraction: float | None = None  # 1.0 below K=100, else 0.1
    threads: int = 1
    out_dir: str = "out"
    resume: str = ""
    resume_iter: int = 0
    n_nodes: int = 75  # synthetic generation only

    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 1.0 / self.K

    def resolved_fraction(self) -> float:
        if self.global_update_fraction is not None:
            return self.global_update_fraction
        return 1.0 if self.K < 100 else 0.1

    def resolved_m(self, n_nodes: int) -> int:
        if self.m is not None:
            return self.m
        return max(1, round(n_nodes / 64))


_BOOL_LIKE = {"true": True, "false": False}


def _parse_value(name: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key '{name}': cannot parse {raw!r} as {typ.__name__}") from None


_FIELD_TYPES = {
    "dataset": str,
    "algorithm": str,
    "K": int,
    "alpha": float,
    "eta": float,
    "delta": float,
    "tau": float,
    "kappa": float,
    "tau0": float,
    "fixed_step": float,
    "m": int,
    "n1": int,
    "n0": int,
    "bulk_batch": int,
    "local_sampling": str,
    "heldout_fraction": float,
    "max_iters": int,
    "eval_interval": int,
    "burn_in": int,
    "seed": int,
    "global_update_fraction": float,
    "threads": int,
    "out_dir": str,
    "resume": str,
    "resume_iter": int,
    "n_nodes": int,
}

VALID_KEYS = tuple(_FIELD_TYPES)


def parse_config(path) -> RunConfig:
    """Parse and validate a config file.  Unknown keys are fatal."""
    cfg = RunConfig()
    seen = set()
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            name, _, raw = stripped.partition("=")
            name = name.strip()
            if name not in _FIELD_TYPES:
                raise ConfigError(
                    f"{path}:{lineno}: unknown config key '{name}'; valid keys: "
                    + ", ".join(VALID_KEYS)
                )
            if name in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key '{name}'")
            seen.add(name)
            setattr(cfg, name, _parse_value(name, raw, _FIELD_TYPES[name]))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got '{cfg.algorithm}'")
    if cfg.local_sampling not in LOCAL_SAMPLING:
        raise ConfigError(f"local_sampling must be one of {LOCAL_SAMPLING}")
    if cfg.K < 1:
        raise ConfigError("K must be >= 1")
    if cfg.alpha is not None and cfg.alpha <= 0:
        raise ConfigError("alpha must be positive")
    if cfg.eta <= 0:
        raise ConfigError("eta must be positive")
    if not (0.0 < cfg.delta < 1.0):
        raise ConfigError("delta must be in (0, 1)")
    if not (0.0 < cfg.tau <= 1.0):
        raise ConfigError("tau must be in (0, 1]")
    if not (0.0 < cfg.kappa <= 1.0):
        raise ConfigError("kappa must be in (0, 1]")
    if cfg.tau0 < 0:
        raise ConfigError("tau0 must be >= 0")
    if cfg.fixed_step is not None and cfg.fixed_step <= 0:
        raise ConfigError("fixed_step must be positive")
    if cfg.m is not None and cfg.m < 1:
        raise ConfigError("m must be >= 1")
    if cfg.n1 < 1 or cfg.n0 < 1:
        raise ConfigError("n1 and n0 must be >= 1")
    if cfg.bulk_batch < 1:
        raise ConfigError("bulk_batch must be >= 1")
    if not (0.0 < cfg.heldout_fraction < 1.0):
        raise ConfigError("heldout_fraction must be in (0, 1)")
    if cfg.max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if cfg.eval_interval < 1:
        raise ConfigError("eval_interval must be >= 1")
    if cfg.burn_in < 0:
        raise ConfigError("burn_in must be >= 0")
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    if cfg.global_update_fraction is not None and not (0.0 < cfg.global_update_fraction <= 1.0):
        raise ConfigError("global_update_fraction must be in (0, 1]")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.resume_iter < 0:
        raise ConfigError("resume_iter must be >= 0")
    if cfg.n_nodes < 2:
        raise ConfigError("n_nodes must be >= 2")


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for f in fields(cfg):
            val = getattr(cfg, f.name)
            if val is None:
                continue
            fh.write(f"{f.name} = {val}\n")
