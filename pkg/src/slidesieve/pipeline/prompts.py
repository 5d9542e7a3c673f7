"""Evaluation prompts derived from reference-dataset metadata."""
from __future__ import annotations

from dataclasses import dataclass

DEFAULT_TEMPLATE_ID = "organ-tumor-v1"
TEMPLATES = {
    DEFAULT_TEMPLATE_ID: "a histopathology image of {tumor_type} in the {organ}",
}


class EmptyField(Exception):
    pass


@dataclass(frozen=True)
class PromptSpec:
    condition_key: str
    organ: str
    tumor_type: str
    prompt_text: str
    template_id: str


def condition_key(organ: str, tumor_type: str) -> str:
    return f"{organ.strip().lower()}|{tumor_type.strip().lower()}"


def derive_prompts(rows: list[dict], template_id: str = DEFAULT_TEMPLATE_ID) -> list[PromptSpec]:
    """One PromptSpec per distinct (organ, tumor_type); duplicates collapse."""
    template = TEMPLATES[template_id]
    seen: dict[str, PromptSpec] = {}
    for row in rows:
        organ = (row.get("organ") or "").strip()
        tumor_type = (row.get("tumor_type") or "").strip()
        if not organ or not tumor_type:
            raise EmptyField(f"row missing organ or tumor_type: {row!r}")
        key = condition_key(organ, tumor_type)
        if key not in seen:
            seen[key] = PromptSpec(
                condition_key=key,
                organ=organ,
                tumor_type=tumor_type,
                prompt_text=template.format(organ=organ, tumor_type=tumor_type),
                template_id=template_id,
            )
    return sorted(seen.values(), key=lambda p: p.condition_key)
