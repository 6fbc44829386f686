"""Pipeline configuration (flat key=value file) and manifest handling.

Config files hold one `key = value` per line with `#` comments. Unknown keys
are rejected so typos cannot silently fall back to defaults. Manifests are
TSVs of `utt_id<TAB>audio<TAB>lyrics[<TAB>truth]` with paths resolved
relative to the manifest file.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields

from .features.assemble import FeatureConfig


class ConfigError(ValueError):
    pass


class ManifestError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_tuple(parser):
    def parse(text: str):
        text = text.strip()
        if not text:
            return ()
        return tuple(parser(part.strip()) for part in text.split(","))
    return parse


def _parse_optional_float(text: str):
    return float(text) if text.strip() else None


@dataclass
class PipelineConfig:
    # features
    feature_config: str = "C1"
    delta_window: int = 2
    cmvn: bool = True
    # acoustic model
    em_iterations: int = 10
    gaussians_per_state: int = 4
    mixup_iterations: tuple = (2, 4, 6)
    mlp_hidden: tuple = (256, 256)
    learning_rate: float = 0.003
    mlp_epochs: int = 5
    batch_size: int = 128
    splice_context: int = 4
    subsample: int = 3
    use_mlp: bool = True
    speed_perturb: tuple = ()
    # adaptation grid
    adapt_lr_multipliers: tuple = (1.0, 0.5)
    adapt_epochs: tuple = (1, 2, 3)
    # aligner
    sil: bool = True
    mus: bool = False
    beam: float | None = None
    oov_as_spn: bool = False
    max_vowel_repeat: int = 3
    # evaluation
    tolerance_sec: float = 0.25
    # misc
    seed: int = 1234
    dictionary: str = ""
    phone_set: str = ""

    _PARSERS = {
        "feature_config": str,
        "delta_window": int,
        "cmvn": _parse_bool,
        "em_iterations": int,
        "gaussians_per_state": int,
        "mixup_iterations": _parse_tuple(int),
        "mlp_hidden": _parse_tuple(int),
        "learning_rate": float,
        "mlp_epochs": int,
        "batch_size": int,
        "splice_context": int,
        "subsample": int,
        "use_mlp": _parse_bool,
        "speed_perturb": _parse_tuple(float),
        "adapt_lr_multipliers": _parse_tuple(float),
        "adapt_epochs": _parse_tuple(int),
        "sil": _parse_bool,
        "mus": _parse_bool,
        "beam": _parse_optional_float,
        "oov_as_spn": _parse_bool,
        "max_vowel_repeat": int,
        "tolerance_sec": float,
        "seed": int,
        "dictionary": str,
        "phone_set": str,
    }

    def __post_init__(self):
        self.feature()  # validates the preset name
        if self.em_iterations < 0 or self.mlp_epochs < 0:
            raise ConfigError("iteration counts must be non-negative")
        if self.subsample < 1 or self.splice_context < 0:
            raise ConfigError("invalid splice/subsample")
        if self.tolerance_sec <= 0:
            raise ConfigError("tolerance_sec must be positive")
        if not self.adapt_lr_multipliers or not self.adapt_epochs:
            raise ConfigError("adaptation grid must be non-empty")

    def feature(self) -> FeatureConfig:
        return FeatureConfig.from_name(self.feature_config, self.delta_window, self.cmvn)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            out[f.name] = "" if value is None else str(value)
        return out

    def digest(self, keys=None) -> str:
        data = self.to_dict()
        keys = sorted(data) if keys is None else sorted(keys)
        blob = "\n".join(f"{k}={data[k]}" for k in keys)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


FEATURE_KEYS = ("feature_config", "delta_window", "cmvn")
TRAIN_KEYS = FEATURE_KEYS + (
    "em_iterations", "gaussians_per_state", "mixup_iterations", "mlp_hidden",
    "learning_rate", "mlp_epochs", "batch_size", "splice_context", "subsample",
    "use_mlp", "speed_perturb", "sil", "mus", "max_vowel_repeat", "seed",
)
ALIGN_KEYS = ("sil", "mus", "beam", "oov_as_spn", "max_vowel_repeat")


def parse_config(text: str) -> PipelineConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in PipelineConfig._PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = PipelineConfig._PARSERS[key](value)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return PipelineConfig(**values)


def read_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class ManifestRow:
    utt_id: str
    audio: str
    lyrics: str
    truth: str | None = None


@dataclass
class Manifest:
    rows: list
    base_dir: str = "."

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def parse_manifest(text: str, base_dir: str = ".", check_paths: bool = True) -> Manifest:
    rows = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        fields_ = raw.rstrip("\n").split("\t")
        if len(fields_) not in (3, 4):
            raise ManifestError(f"line {lineno}: expected 3 or 4 tab-separated fields")
        utt_id = fields_[0]
        if utt_id in seen:
            raise ManifestError(f"line {lineno}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        paths = [os.path.join(base_dir, p) for p in fields_[1:]]
        if check_paths:
            for p in paths:
                if not os.path.exists(p):
                    raise ManifestError(f"line {lineno}: missing file {p}")
        truth = paths[2] if len(paths) == 3 else None
        rows.append(ManifestRow(utt_id, paths[0], paths[1], truth))
    return Manifest(rows, base_dir)


def read_manifest(path, check_paths: bool = True) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read(), os.path.dirname(os.path.abspath(path)), check_paths)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    with open(path, "rb") as fh:
        return sha256_bytes(fh.read())
