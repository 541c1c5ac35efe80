"""Experiment configuration: TOML-style key/value files with flag overrides
(flags win)."""

from __future__ import annotations

from dataclasses import dataclass

from .model import HEAD_HIDDEN_SIZES


@dataclass
class ExperimentConfig:
    feature: str = "fbank"
    pooling: str = "sap"
    k: int = 256
    family: str = "head"
    seed: int = 0
    manifest: str = ""
    features_dir: str = ""
    out: str = ""
    augmentation: bool = False
    bandwidth_filter: bool = True

    def validate(self) -> None:
        if self.family not in ("head", "cnn"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.pooling not in ("mean", "sap"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.family == "head" and self.k not in HEAD_HIDDEN_SIZES:
            raise ValueError(
                f"head-family k must be one of {HEAD_HIDDEN_SIZES}, got {self.k}"
            )
        if self.family == "cnn" and self.feature != "spectrogram":
            raise ValueError("the CNN family consumes spectrogram features")


def _parse_value(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config_file(path) -> dict:
    """key = value lines; # comments; quoted strings, ints, floats, bools."""
    values: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped or stripped.startswith("["):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            values[key.strip()] = _parse_value(raw)
    return values


def merge_options(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags
    (None flags mean "not given")."""
    merged = dict(defaults)
    for k, v in file_values.items():
        if k in merged:
            merged[k] = v
    for k, v in flag_values.items():
        if v is not None:
            merged[k] = v
    return merged
