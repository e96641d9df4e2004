"""
Experiment configuration loaded from a sectioned TOML (or YAML) document.

Every section rejects unknown keys. Defaults follow the published training
recipe: text lr 5e-5 / batch 16, speech lr 1e-5 / batch 8, fusion lr 1e-3 /
batch 32, 10 epochs everywhere.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from src.decision.voting import VotingPolicy
from src.domain.models import Language
from src.errors import ConfigError
from src.models.types import (
    EncoderSettings,
    FusionConfig,
    SpeechHyperparams,
    TextHyperparams,
)
from src.synthetic.generator import SyntheticSpec
from src.utils.hashing import canonical_json, derive_seed, sha256_bytes

YAML_SUFFIXES = (".yaml", ".yml")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSection(_Section):
    manifest_path: str
    split_ratios: Tuple[PositiveInt, PositiveInt, PositiveInt] = (4, 1, 1)
    split_seed: Optional[int] = None


class ProviderSection(_Section):
    provider_id: str = Field(min_length=1)
    config: Dict[str, Any] = {}
    concurrency: PositiveInt = 4
    max_attempts: PositiveInt = 3


class AsrSection(ProviderSection):
    provider_id: str = "file"


class ExtractionSection(ProviderSection):
    provider_id: str = "mock"
    prompt_version: str = "v1"
    languages: List[Language] = [Language.ZH, Language.EN]
    lexicon_path: Optional[str] = None

    @field_validator("languages")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("at least one output language is required")
        return sorted(set(v), key=lambda lang: list(Language).index(lang))


class TextModelSection(_Section):
    encoder: EncoderSettings
    hyperparams: TextHyperparams = TextHyperparams()
    input_source: Literal["features", "transcript"] = "features"
    feature_language: Language = Language.ZH


class SpeechModelSection(_Section):
    encoder: EncoderSettings
    hyperparams: SpeechHyperparams = SpeechHyperparams()


class DecisionSection(_Section):
    policy: VotingPolicy = VotingPolicy.MAJORITY_ARGMAX
    tie_label: Literal["at_risk", "non_risk"] = "at_risk"


class ReportSection(_Section):
    accuracy_format: Literal["integer", "decimal"] = "integer"
    splits: List[Literal["dev", "test"]] = ["dev", "test"]
    method_name: Optional[str] = None


class RuntimeSection(_Section):
    seed: int = 0
    cache_root: str = "cache"
    output_root: str = "outputs"


class ExperimentConfig(_Section):
    """Resolved experiment configuration."""

    experiment_id: str = Field(min_length=1)
    dataset: DatasetSection
    asr: AsrSection = AsrSection()
    extraction: ExtractionSection = ExtractionSection()
    text_model: TextModelSection
    speech_model: SpeechModelSection
    fusion: FusionConfig = FusionConfig()
    decision: DecisionSection = DecisionSection()
    report: ReportSection = ReportSection()
    runtime: RuntimeSection = RuntimeSection()
    synthetic: Optional[SyntheticSpec] = None
    # Directory relative paths resolve against; set by load_config
    base_dir: str = Field(default=".", exclude=True)

    @model_validator(mode="after")
    def _resolve_provenance(self):
        # fan the runtime seed out so every stage carries an explicit seed
        seed = self.runtime.seed
        if self.dataset.split_seed is None:
            self.dataset.split_seed = derive_seed(seed, "ingest")
        self.text_model.hyperparams = self.text_model.hyperparams.model_copy(
            update={"seed": derive_seed(seed, "train_text")}
        )
        self.speech_model.hyperparams = self.speech_model.hyperparams.model_copy(
            update={"seed": derive_seed(seed, "train_speech")}
        )
        self.fusion = self.fusion.model_copy(update={
            "text_encoder_id": self.text_model.encoder.encoder_id,
            "speech_encoder_id": self.speech_model.encoder.encoder_id,
            "seed": derive_seed(seed, "train_fusion"),
        })
        if self.extraction.provider_id == "mock" and self.extraction.lexicon_path is None:
            self.extraction.lexicon_path = self.text_model.encoder.lexicon_path
        return self

    def resolve_path(self, value: Union[str, Path]) -> Path:
        path = Path(value)
        return path if path.is_absolute() else Path(self.base_dir) / path

    @property
    def experiment_dir(self) -> Path:
        return self.resolve_path(self.runtime.output_root) / self.experiment_id

    @property
    def cache_root(self) -> Path:
        return self.resolve_path(self.runtime.cache_root)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the resolved config."""
        return sha256_bytes(canonical_json(self.model_dump(mode="json")).encode("utf-8"))


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment config.

    Args:
        path: TOML config file, or YAML when the suffix is .yaml / .yml

    Returns:
        ExperimentConfig with defaults applied and provenance fields populated

    Raises:
        ConfigError: Missing file, unparsable document, unknown keys or invalid values
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")

    try:
        if path.suffix.lower() in YAML_SUFFIXES:
            with path.open("r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        else:
            with path.open("rb") as f:
                raw = tomllib.load(f)
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_format_errors(e)}") from e

    return config.model_copy(update={"base_dir": str(path.parent.resolve())})
