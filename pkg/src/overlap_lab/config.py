"""Run configuration: TOML loading, seed merging and hashing."""

from __future__ import annotations

from pathlib import Path

try:  # python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - environment fallback
    import tomli as tomllib

from .errors import InvalidConfigError
from .estimators import hash_config

DEFAULT_SEED = 20260809


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InvalidConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfigError(f"{path}: invalid TOML ({exc})") from exc


def resolve_seed(cfg: dict, override: int | None) -> int:
    """--seed beats the config file beats the package default."""
    if override is not None:
        return int(override)
    seed = cfg.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise InvalidConfigError("seed must be an integer")
    return seed


def stamp(cfg: dict, seed: int) -> dict:
    """Reproducibility block echoed into every report."""
    return {
        "config": cfg,
        "seed": seed,
        "config_hash": hash_config({"config": cfg, "seed": seed}),
    }
