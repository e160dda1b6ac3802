"""Complex-valued CQT anti-spoofing toolkit."""

from ._core import (
    CcqtError,
    ConfigError,
    FormatError,
    ShapeError,
    StateError,
    UsageError,
    compute_eer,
    cqt,
    load_wav,
    parse_config,
    run,
    saliency,
    save_wav,
)

__all__ = [
    "CcqtError",
    "ConfigError",
    "FormatError",
    "ShapeError",
    "StateError",
    "UsageError",
    "compute_eer",
    "cqt",
    "load_wav",
    "parse_config",
    "run",
    "saliency",
    "save_wav",
]
