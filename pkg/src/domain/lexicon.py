"""
Marker lexicon used by the mock extractor, the bag-of-markers encoder and the
synthetic corpus generator. Slot order is file order.

File format (TOML)::

    [[markers]]
    zh = "哭"
    en = "cry"
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.domain.models import Language
from src.errors import ConfigError


class MarkerEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    zh: str = Field(min_length=1)
    en: str = Field(min_length=1)


class MarkerLexicon(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    markers: Tuple[MarkerEntry, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique(self):
        for lang in ("zh", "en"):
            forms = [getattr(m, lang) for m in self.markers]
            if len(set(forms)) != len(forms):
                raise ValueError(f"duplicate {lang} marker forms")
        return self

    def __len__(self) -> int:
        return len(self.markers)

    def forms(self, language: Language) -> List[str]:
        return [getattr(m, language.value) for m in self.markers]

    def zh_to_en(self) -> Dict[str, str]:
        """Count-preserving zh -> en lookup table."""
        return {m.zh: m.en for m in self.markers}

    def slots(self) -> List[Tuple[str, ...]]:
        """Surface forms per slot, all languages."""
        return [(m.zh, m.en) for m in self.markers]


def load_lexicon(path: Union[str, Path]) -> MarkerLexicon:
    """
    Load a marker lexicon file.

    Raises:
        ConfigError: Missing or malformed file
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"lexicon not found: {path}")
    try:
        with path.open("rb") as f:
            return MarkerLexicon.model_validate(tomllib.load(f))
    except (tomllib.TOMLDecodeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e
