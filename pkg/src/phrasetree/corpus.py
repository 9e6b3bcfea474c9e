"""Parse, validate and index SGD/SGD-X schema and dialogue files.

The on-disk JSON field names (`service_name`, `slots`, `intents`,
`is_categorical`, `possible_values`, ...) are the external contract. Every
parsed object keeps its raw dict, so re-serialized files are identical to
their source apart from replaced description strings: emitted variants
stay drop-in replacements for the originals.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)


class ElementKind(str, Enum):
    SERVICE = "SERVICE"
    SLOT = "SLOT"
    INTENT = "INTENT"


@dataclass(frozen=True)
class SchemaElementRef:
    """Address of one describable schema element."""

    service_name: str
    element_kind: ElementKind
    element_name: str

    def key(self) -> str:
        return f"{self.service_name}/{self.element_kind.value}/{self.element_name}"

    @classmethod
    def from_key(cls, key: str) -> "SchemaElementRef":
        service, kind, name = key.split("/", 2)
        return cls(service, ElementKind(kind), name)


@dataclass(frozen=True)
class SlotDef:
    name: str
    description: str
    is_categorical: bool = False
    possible_values: tuple[str, ...] = ()


@dataclass(frozen=True)
class IntentDef:
    name: str
    description: str
    required_slots: tuple[str, ...] = ()
    optional_slots: tuple[str, ...] = ()


@dataclass
class SchemaDocument:
    """One service API: name, description, slots, intents.

    `raw` is the parsed JSON object with unknown fields untouched.
    """

    service_name: str
    service_description: str
    slots: list[SlotDef]
    intents: list[IntentDef]
    raw: dict = field(default_factory=dict, repr=False)

    def slot(self, name: str) -> SlotDef:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(f"{self.service_name} has no slot {name!r}")

    def description_of(self, ref: SchemaElementRef) -> str:
        if ref.element_kind is ElementKind.SERVICE:
            return self.service_description
        if ref.element_kind is ElementKind.SLOT:
            return self.slot(ref.element_name).description
        for i in self.intents:
            if i.name == ref.element_name:
                return i.description
        raise KeyError(f"{self.service_name} has no element {ref.element_name!r}")

    def to_raw(self) -> dict:
        """On-disk dict; the parsed raw object is authoritative when present."""
        if self.raw:
            return self.raw
        return {
            "service_name": self.service_name,
            "description": self.service_description,
            "slots": [
                {"name": s.name, "description": s.description,
                 "is_categorical": s.is_categorical,
                 "possible_values": list(s.possible_values)}
                for s in self.slots
            ],
            "intents": [
                {"name": it.name, "description": it.description,
                 "required_slots": list(it.required_slots),
                 "optional_slots": it.optional_slots if isinstance(it.optional_slots, dict)
                 else list(it.optional_slots)}
                for it in self.intents
            ],
        }


class Speaker(str, Enum):
    USER = "USER"
    SYSTEM = "SYSTEM"


@dataclass(frozen=True)
class Frame:
    service: str
    state: dict[str, list[str]]
    active_intent: str = "NONE"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    utterance: str
    frames: tuple[Frame, ...] = ()


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    services: tuple[str, ...]
    turns: tuple[Turn, ...]

    def user_turn_indices(self) -> list[int]:
        return [i for i, t in enumerate(self.turns) if t.speaker is Speaker.USER]


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------

def _fail(message, strict):
    if strict:
        raise ValidationError(message)
    log.warning("%s (lenient mode: continuing)", message)


def _load_json(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", path=str(path), offset=exc.pos) from exc


def _parse_service(obj, path, strict) -> SchemaDocument:
    name = obj.get("service_name", "")
    if not name:
        _fail(f"service without service_name in {path}", strict)
    desc = obj.get("description", "")
    if not desc:
        _fail(f"service {name!r} has an empty description", strict)

    slots = []
    seen_slots = set()
    for s in obj.get("slots", []):
        if s["name"] in seen_slots:
            _fail(f"service {name!r} has duplicate slot {s['name']!r}", strict)
        seen_slots.add(s["name"])
        if not s.get("description"):
            _fail(f"slot {name}.{s['name']} has an empty description", strict)
        is_cat = bool(s.get("is_categorical", False))
        values = tuple(str(v) for v in s.get("possible_values", []))
        if is_cat and len(values) < 2:
            _fail(f"categorical slot {name}.{s['name']} has {len(values)} values", strict)
        if not is_cat:
            values = ()
        slots.append(SlotDef(s["name"], s.get("description", ""), is_cat, values))

    intents = []
    seen_intents = set()
    for it in obj.get("intents", []):
        if it["name"] in seen_intents:
            _fail(f"service {name!r} has duplicate intent {it['name']!r}", strict)
        seen_intents.add(it["name"])
        if not it.get("description"):
            _fail(f"intent {name}.{it['name']} has an empty description", strict)
        required = tuple(it.get("required_slots", ()))
        optional = it.get("optional_slots", ())
        # SGD stores optional_slots as {slot: default}; keep names for checks
        optional_names = tuple(optional) if not isinstance(optional, dict) else tuple(optional.keys())
        for slot_name in (*required, *optional_names):
            if slot_name not in seen_slots:
                _fail(f"intent {name}.{it['name']} references unknown slot {slot_name!r}", strict)
        intents.append(IntentDef(it["name"], it.get("description", ""), required,
                                 optional if isinstance(optional, dict) else optional_names))

    return SchemaDocument(name, desc, slots, intents, raw=obj)


def load_schemas(path, strict: bool = True) -> list[SchemaDocument]:
    """Load a schema.json file (JSON array of services), order preserved."""
    data = _load_json(path)
    if not isinstance(data, list):
        raise ParseError("schema file is not a JSON array", path=str(path))
    return [_parse_service(obj, path, strict) for obj in data]


def _parse_dialogue(obj, path, strict) -> Dialogue:
    did = obj.get("dialogue_id", "?")
    services = tuple(obj.get("services", []))
    turns = []
    for i, t in enumerate(obj.get("turns", [])):
        speaker = Speaker(t["speaker"])
        expected = Speaker.USER if i % 2 == 0 else Speaker.SYSTEM
        if speaker is not expected:
            _fail(f"dialogue {did}: turn {i} is {speaker.value}, expected {expected.value}", strict)
        frames = []
        for fr in t.get("frames", []):
            service = fr.get("service", "")
            if service not in services:
                _fail(f"dialogue {did}: frame service {service!r} not in services list", strict)
            state = fr.get("state", {})
            slot_values = {
                slot: [str(v) for v in values]
                for slot, values in state.get("slot_values", {}).items()
            }
            frames.append(Frame(service, slot_values, state.get("active_intent", "NONE")))
        turns.append(Turn(speaker, t.get("utterance", ""), tuple(frames)))
    return Dialogue(did, services, tuple(turns))


def load_dialogue_file(path, strict: bool = True) -> list[Dialogue]:
    data = _load_json(path)
    if not isinstance(data, list):
        raise ParseError("dialogue file is not a JSON array", path=str(path))
    return [_parse_dialogue(obj, path, strict) for obj in data]


def load_dialogues(directory, strict: bool = True, pattern: str = "dialogues_*.json") -> list[Dialogue]:
    """Load every dialogue file in a directory, (filename, file-order) stable."""
    out = []
    for path in sorted(Path(directory).glob(pattern)):
        out.extend(load_dialogue_file(path, strict))
    return out


# --------------------------------------------------------------------------
# enumeration and split bookkeeping
# --------------------------------------------------------------------------

def extract_descriptions(schemas: list[SchemaDocument]) -> list[tuple[SchemaElementRef, str]]:
    """One (ref, description) entry per service, slot and intent description.

    Order is deterministic: services in file order; within a service the
    service description, then slots, then intents, each in file order.
    """
    out = []
    for doc in schemas:
        out.append((SchemaElementRef(doc.service_name, ElementKind.SERVICE,
                                     doc.service_name), doc.service_description))
        for s in doc.slots:
            out.append((SchemaElementRef(doc.service_name, ElementKind.SLOT, s.name),
                        s.description))
        for it in doc.intents:
            out.append((SchemaElementRef(doc.service_name, ElementKind.INTENT, it.name),
                        it.description))
    return out


def mark_seen_services(train_schemas: list[SchemaDocument],
                       test_schemas: list[SchemaDocument]) -> dict[str, bool]:
    """seen <=> the test service name appears in the training split."""
    train_names = {doc.service_name for doc in train_schemas}
    return {doc.service_name: doc.service_name in train_names for doc in test_schemas}


def dump_normalized(schemas: list[SchemaDocument], dialogues: list[Dialogue], out_path):
    """Debugging JSONL dump of the normalized view (--dump-normalized)."""
    with open(out_path, "w", encoding="utf-8") as f:
        for doc in schemas:
            f.write(json.dumps({
                "kind": "schema",
                "service": doc.service_name,
                "n_slots": len(doc.slots),
                "n_intents": len(doc.intents),
            }, ensure_ascii=False) + "\n")
        for d in dialogues:
            f.write(json.dumps({
                "kind": "dialogue",
                "dialogue_id": d.dialogue_id,
                "services": list(d.services),
                "n_turns": len(d.turns),
            }, ensure_ascii=False) + "\n")


def replace_descriptions(doc: SchemaDocument,
                         replacements: dict[str, str]) -> SchemaDocument:
    """New SchemaDocument with descriptions swapped per element-ref key.

    Operates on a deep copy of the raw object so every other byte of the
    emitted file matches the source.
    """
    raw = json.loads(json.dumps(doc.to_raw()))
    service_key = SchemaElementRef(
        doc.service_name, ElementKind.SERVICE, doc.service_name).key()
    if service_key in replacements:
        raw["description"] = replacements[service_key]
    for s in raw.get("slots", []):
        key = SchemaElementRef(doc.service_name, ElementKind.SLOT, s["name"]).key()
        if key in replacements:
            s["description"] = replacements[key]
    for it in raw.get("intents", []):
        key = SchemaElementRef(doc.service_name, ElementKind.INTENT, it["name"]).key()
        if key in replacements:
            it["description"] = replacements[key]
    return _parse_service(raw, "<replaced>", strict=False)


def write_schemas(schemas: list[SchemaDocument], path):
    """Serialize schemas back to the SGD on-disk format."""
    payload = [doc.to_raw() for doc in schemas]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")
