"""Serialize DST training/evaluation examples in the two prompt formats.

Single-pass format (indexed slots): the input enumerates every slot of the
active schema as `i=description`, categorical slots carrying lettered
options `a) v1 b) v2 ...`, followed by the `[usr]`/`[sys]`-prefixed
dialogue history; the target lists the active slots of the cumulative
state as `i=value` with categorical values rendered as their option
letter. Per-slot format: the history is suffixed with ` [slot] ` and one
slot description, and the target is the value (`none` when unmentioned).

Everything is lowercased except the literal `[usr]`, `[sys]`, `[slot]`
markers. `dontcare` is emitted as a literal value, never as an option
letter.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import asdict, dataclass

from .corpus import Dialogue, SchemaDocument, SlotDef, Speaker
from .errors import DataError

_INDEX_PAIR_RE = re.compile(r"(\d+)=")

DONTCARE = "dontcare"
NONE_VALUE = "none"


@dataclass(frozen=True)
class D3stExample:
    input: str
    target: str
    dialogue_id: str
    turn: int
    service: str
    variant: str = "orig"


@dataclass(frozen=True)
class T5dstExample:
    input: str
    target: str
    dialogue_id: str
    turn: int
    service: str
    slot: str
    variant: str = "orig"


def option_letter(index: int) -> str:
    """a, b, ..., z, aa, ab, ... (alphabetic continuation past 26 options)."""
    letters = ""
    index += 1
    while index > 0:
        index, rem = divmod(index - 1, 26)
        letters = chr(ord("a") + rem) + letters
    return letters


def _options_block(slot: SlotDef) -> str:
    return " ".join(
        f"{option_letter(i)}) {v.lower()}" for i, v in enumerate(slot.possible_values)
    )


def _history_block(dialogue: Dialogue, turn_index: int) -> str:
    parts = []
    for t in dialogue.turns[:turn_index + 1]:
        marker = "[usr]" if t.speaker is Speaker.USER else "[sys]"
        parts.append(f"{marker} {t.utterance.lower()}")
    return " ".join(parts)


def _categorical_target(slot: SlotDef, values: list[str], dialogue_id: str,
                        turn_index: int, service: str) -> str:
    for value in values:
        if value == DONTCARE:
            return DONTCARE
        if value in slot.possible_values:
            return option_letter(slot.possible_values.index(value))
    lowered = [v.lower() for v in slot.possible_values]
    for value in values:
        if value.lower() in lowered:
            return option_letter(lowered.index(value.lower()))
    raise DataError(
        f"dialogue {dialogue_id} turn {turn_index} service {service}: value "
        f"{values!r} not among possible_values of categorical slot {slot.name!r}"
    )


def truncate_tokens(text: str, budget: int | None) -> str:
    """Keep the last `budget` whitespace tokens (pluggable-tokenizer hook)."""
    if budget is None:
        return text
    tokens = text.split()
    return " ".join(tokens[-budget:])


# --------------------------------------------------------------------------
# single-pass (indexed-slot) format
# --------------------------------------------------------------------------

def _d3st_prompt(slots: list[SlotDef]) -> str:
    blocks = []
    for i, slot in enumerate(slots):
        block = f"{i}={slot.description.lower()}"
        if slot.is_categorical:
            block += " " + _options_block(slot)
        blocks.append(block)
    return " ".join(blocks)


def _d3st_target(slots: list[SlotDef], state_by_index: dict[int, list[str]],
                 dialogue_id: str, turn_index: int, service: str) -> str:
    pairs = []
    for i, slot in enumerate(slots):
        values = state_by_index.get(i)
        if not values:
            continue
        if slot.is_categorical:
            rendered = _categorical_target(slot, values, dialogue_id, turn_index, service)
        else:
            rendered = values[0].lower()
        pairs.append(f"{i}={rendered}")
    return " ".join(pairs)


def build_d3st(dialogues: list[Dialogue], schemas: list[SchemaDocument],
               variant: str = "orig", turn_mode: str = "frame",
               max_input_tokens: int | None = None) -> list[D3stExample]:
    """One example per user turn per frame (`turn_mode="frame"`, default) or
    per user turn with all dialogue services concatenated (`"dialogue"`)."""
    by_name = {doc.service_name: doc for doc in schemas}
    out = []
    for dialogue in dialogues:
        for turn_index in dialogue.user_turn_indices():
            turn = dialogue.turns[turn_index]
            history = _history_block(dialogue, turn_index)
            if turn_mode == "frame":
                for frame in turn.frames:
                    doc = by_name[frame.service]
                    state_by_index = {
                        i: frame.state[slot.name]
                        for i, slot in enumerate(doc.slots) if slot.name in frame.state
                    }
                    prompt = _d3st_prompt(doc.slots)
                    target = _d3st_target(doc.slots, state_by_index, dialogue.dialogue_id,
                                          turn_index, frame.service)
                    out.append(D3stExample(
                        input=truncate_tokens(f"{prompt} {history}", max_input_tokens),
                        target=target,
                        dialogue_id=dialogue.dialogue_id,
                        turn=turn_index,
                        service=frame.service,
                        variant=variant,
                    ))
            elif turn_mode == "dialogue":
                slots: list[SlotDef] = []
                index_of: dict[tuple[str, str], int] = {}
                for service in dialogue.services:
                    for slot in by_name[service].slots:
                        index_of[(service, slot.name)] = len(slots)
                        slots.append(slot)
                state_by_index: dict[int, list[str]] = {}
                for frame in turn.frames:
                    for slot_name, values in frame.state.items():
                        idx = index_of.get((frame.service, slot_name))
                        if idx is not None:
                            state_by_index[idx] = values
                prompt = _d3st_prompt(slots)
                target = _d3st_target(slots, state_by_index, dialogue.dialogue_id,
                                      turn_index, ",".join(dialogue.services))
                out.append(D3stExample(
                    input=truncate_tokens(f"{prompt} {history}", max_input_tokens),
                    target=target,
                    dialogue_id=dialogue.dialogue_id,
                    turn=turn_index,
                    service=",".join(dialogue.services),
                    variant=variant,
                ))
            else:
                raise ValueError(f"unknown turn_mode {turn_mode!r}")
    return out


def parse_d3st_target(target: str, slots: list[SlotDef]) -> dict[str, str]:
    """Invert the target rendering back to slot name -> value."""
    state: dict[str, str] = {}
    matches = list(_INDEX_PAIR_RE.finditer(target))
    for pos, m in enumerate(matches):
        end = matches[pos + 1].start() if pos + 1 < len(matches) else len(target)
        index = int(m.group(1))
        value = target[m.end():end].strip()
        slot = slots[index]
        if slot.is_categorical and value != DONTCARE:
            letters = [option_letter(i) for i in range(len(slot.possible_values))]
            value = slot.possible_values[letters.index(value)].lower()
        state[slot.name] = value
    return state


# --------------------------------------------------------------------------
# per-slot format
# --------------------------------------------------------------------------

def build_t5dst(dialogues: list[Dialogue], schemas: list[SchemaDocument],
                variant: str = "orig",
                max_input_tokens: int | None = None) -> list[T5dstExample]:
    """One example per user turn per frame per slot of that service's schema."""
    by_name = {doc.service_name: doc for doc in schemas}
    out = []
    for dialogue in dialogues:
        for turn_index in dialogue.user_turn_indices():
            turn = dialogue.turns[turn_index]
            history = _history_block(dialogue, turn_index)
            for frame in turn.frames:
                doc = by_name[frame.service]
                for slot in doc.slots:
                    suffix = slot.description.lower()
                    if slot.is_categorical:
                        suffix += " " + _options_block(slot)
                    values = frame.state.get(slot.name, [])
                    if not values:
                        target = NONE_VALUE
                    elif slot.is_categorical:
                        target = _categorical_target(
                            slot, values, dialogue.dialogue_id, turn_index, frame.service)
                    else:
                        target = values[0].lower()
                    out.append(T5dstExample(
                        input=truncate_tokens(f"{history} [slot] {suffix}", max_input_tokens),
                        target=target,
                        dialogue_id=dialogue.dialogue_id,
                        turn=turn_index,
                        service=frame.service,
                        slot=slot.name,
                        variant=variant,
                    ))
    return out


def parse_t5dst_target(target: str, slot: SlotDef) -> str | None:
    """Invert a per-slot target back to the value (None when unmentioned)."""
    if target == NONE_VALUE:
        return None
    if slot.is_categorical and target != DONTCARE:
        letters = [option_letter(i) for i in range(len(slot.possible_values))]
        return slot.possible_values[letters.index(target)].lower()
    return target


# --------------------------------------------------------------------------
# dataset composition and output
# --------------------------------------------------------------------------

def compose_augmented_dataset(base: list, variant_example_lists: list[list],
                              multiplier: int, seed: int | None = None) -> list:
    """Base plus one full re-serialization per variant v1..v(multiplier-1).

    A seed shuffles the combined dataset stably; multiplier 1 returns the
    base untouched either way.
    """
    if not 1 <= multiplier <= 6:
        raise ValueError("multiplier must be between 1 and 6")
    if multiplier == 1:
        return list(base)
    needed = multiplier - 1
    if needed > len(variant_example_lists):
        raise ValueError(
            f"multiplier {multiplier} needs {needed} variants, "
            f"have {len(variant_example_lists)}"
        )
    combined = list(base)
    for examples in variant_example_lists[:needed]:
        combined.extend(examples)
    if seed is not None:
        random.Random(seed).shuffle(combined)
    return combined


def write_examples_jsonl(examples: list, path):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(asdict(ex), ensure_ascii=False) + "\n")


def write_examples_tsv(examples: list, path):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            row = asdict(ex)
            f.write("\t".join(str(row[k]) for k in row) + "\n")
