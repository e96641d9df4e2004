"""
Versioned prompt templates for risk-feature extraction.

Templates live in ``templates/<version>/<task>.txt``. Each file holds one
``{output_language}`` slot, filled when the template is loaded for a
language, and exactly one ``{transcript}`` placeholder, filled at render time.
"""
from functools import lru_cache
from pathlib import Path
from typing import List

from pydantic import BaseModel, ConfigDict

from src.domain.models import Language, TaskKind, TEXT_TASKS, Transcript
from src.errors import PromptError

TEMPLATES_DIR = Path(__file__).parent / "templates"
TRANSCRIPT_PLACEHOLDER = "{transcript}"
LANGUAGE_SLOT = "{output_language}"
DEFAULT_VERSION = "v1"

LANGUAGE_NAMES = {
    Language.ZH: "Chinese",
    Language.EN: "English",
}


class PromptTemplate(BaseModel):
    model_config = ConfigDict(frozen=True)

    task: TaskKind
    language: Language
    version: str
    body: str


def available_versions() -> List[str]:
    return sorted(p.name for p in TEMPLATES_DIR.iterdir() if p.is_dir())


@lru_cache(maxsize=32)
def _read_template(version: str, task: TaskKind) -> str:
    path = TEMPLATES_DIR / version / f"{task.value}.txt"
    if not path.exists():
        raise PromptError(f"prompt template not found: {path}")
    return path.read_text(encoding="utf-8")


def load_template(task: TaskKind, language: Language, version: str = DEFAULT_VERSION) -> PromptTemplate:
    """
    Load the template of one task, with the output language filled in.

    Raises:
        PromptError: PR task, unknown version, or malformed template
    """
    if task not in TEXT_TASKS:
        raise PromptError(f"no prompt exists for {task.value}: its text is identical for every subject")

    raw = _read_template(version, task)
    if raw.count(LANGUAGE_SLOT) != 1:
        raise PromptError(f"template {version}/{task.value} must contain one {LANGUAGE_SLOT} slot")

    template = PromptTemplate(
        task=task,
        language=language,
        version=version,
        body=raw.replace(LANGUAGE_SLOT, LANGUAGE_NAMES[language]),
    )
    _check_placeholder(template)
    return template


def _check_placeholder(template: PromptTemplate):
    count = template.body.count(TRANSCRIPT_PLACEHOLDER)
    if count != 1:
        raise PromptError(
            f"template {template.version}/{template.task.value} has {count} "
            f"{TRANSCRIPT_PLACEHOLDER} placeholders, expected 1"
        )


def render_prompt(template: PromptTemplate, transcript: Transcript) -> str:
    """
    Fill a template with a transcript.

    Raises:
        PromptError: PR task, task mismatch or missing placeholder
    """
    if template.task not in TEXT_TASKS or transcript.task not in TEXT_TASKS:
        raise PromptError("no prompt exists for PR")
    if template.task != transcript.task:
        raise PromptError(
            f"template is for {template.task.value}, transcript is {transcript.task.value}"
        )
    _check_placeholder(template)
    return template.body.replace(TRANSCRIPT_PLACEHOLDER, transcript.text.strip())
