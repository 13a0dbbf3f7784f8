"""Attribute universe: types, legal values, canonical ordering, one-hot codecs.

The schema is the single source of truth for the slot layout used by the
one-hot target vectors, the embedding table, and the discriminator's
attribute head.  Canonical order is the document order of the schema file;
it is deterministic across runs and baked into checkpoints via a hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import IO, Iterable, Mapping

import numpy as np
import yaml


class SchemaError(ValueError):
    """Malformed schema document or illegal type/value structure."""


class UnknownAttributeError(KeyError):
    """An attribute assignment references a type or value the schema lacks."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field

    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return self.args[0]


@dataclass(frozen=True)
class AttributeTypeSpec:
    name: str
    values: tuple[str, ...]


class AttributeSchema:
    """Ordered attribute types with their legal values.

    Immutable after construction; safe for concurrent reads.
    """

    def __init__(self, types: Iterable[AttributeTypeSpec]):
        self.types: tuple[AttributeTypeSpec, ...] = tuple(types)
        self._validate()
        self._block_slices: dict[str, slice] = {}
        self._pair_slots: dict[tuple[str, str], int] = {}
        offset = 0
        for spec in self.types:
            stop = offset + len(spec.values)
            self._block_slices[spec.name] = slice(offset, stop)
            for j, value in enumerate(spec.values):
                self._pair_slots[(spec.name, value)] = offset + j
            offset = stop
        self.num_slots: int = offset

    def _validate(self) -> None:
        if not self.types:
            raise SchemaError("schema has no attribute types")
        seen = set()
        for spec in self.types:
            if not spec.name:
                raise SchemaError("attribute type with empty name")
            if spec.name in seen:
                raise SchemaError(f"duplicate attribute type {spec.name!r}")
            seen.add(spec.name)
            if len(spec.values) < 2:
                raise SchemaError(
                    f"attribute type {spec.name!r} needs at least 2 values, "
                    f"got {len(spec.values)}"
                )
            if len(set(spec.values)) != len(spec.values):
                raise SchemaError(f"duplicate value under type {spec.name!r}")
            if any(not v for v in spec.values):
                raise SchemaError(f"empty value name under type {spec.name!r}")

    # -- lookups ----------------------------------------------------------

    @property
    def type_names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.types)

    def type_spec(self, name: str) -> AttributeTypeSpec:
        for spec in self.types:
            if spec.name == name:
                return spec
        raise UnknownAttributeError(f"unknown attribute type {name!r}", field=name)

    def block_slice(self, type_name: str) -> slice:
        try:
            return self._block_slices[type_name]
        except KeyError:
            raise UnknownAttributeError(
                f"unknown attribute type {type_name!r}", field=type_name
            ) from None

    def slot(self, type_name: str, value: str) -> int:
        try:
            return self._pair_slots[(type_name, value)]
        except KeyError:
            self.block_slice(type_name)  # raises if the type itself is unknown
            raise UnknownAttributeError(
                f"unknown value {value!r} for attribute type {type_name!r}",
                field=type_name,
            ) from None

    def pairs(self) -> list[tuple[str, str]]:
        """All (type, value) pairs in canonical slot order."""
        return [(spec.name, v) for spec in self.types for v in spec.values]

    def validate_assignments(self, attrs: Mapping[str, str]) -> None:
        """Raise UnknownAttributeError unless every assignment is legal."""
        for type_name, value in attrs.items():
            self.slot(type_name, value)

    # -- serialization ----------------------------------------------------

    def to_document(self) -> dict:
        return {
            "types": [
                {"name": spec.name, "values": list(spec.values)}
                for spec in self.types
            ]
        }

    def canonical_bytes(self) -> bytes:
        return yaml.safe_dump(self.to_document(), sort_keys=False).encode("utf-8")

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AttributeSchema) and self.types == other.types

    def __repr__(self) -> str:
        return f"AttributeSchema({len(self.types)} types, {self.num_slots} slots)"


def parse_schema(document: object) -> AttributeSchema:
    """Build a schema from an already-parsed key/value tree."""
    if not isinstance(document, dict) or "types" not in document:
        raise SchemaError("schema document must be a mapping with a 'types' list")
    entries = document["types"]
    if not isinstance(entries, list):
        raise SchemaError("'types' must be a list")
    specs = []
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry or "values" not in entry:
            raise SchemaError(f"type entry must have 'name' and 'values': {entry!r}")
        values = entry["values"]
        if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
            raise SchemaError(f"'values' must be a list of strings for {entry['name']!r}")
        specs.append(AttributeTypeSpec(name=str(entry["name"]), values=tuple(values)))
    return AttributeSchema(specs)


def load_schema(source: IO[bytes] | IO[str] | str) -> AttributeSchema:
    """Load a schema from a YAML stream or file path; ordering is preserved."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"schema document is not valid YAML: {exc}") from exc
    return parse_schema(document)


def save_schema(schema: AttributeSchema, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(schema.canonical_bytes())


def default_schema() -> AttributeSchema:
    """The bundled 11-type portrait attribute schema (82 slots)."""
    ref = resources.files("portraitgen.resources").joinpath("default_schema.yaml")
    with ref.open("rb") as fh:
        return load_schema(fh)


def encode_onehot(attrs: Mapping[str, str], schema: AttributeSchema) -> np.ndarray:
    """Encode assignments as a length-K one-hot-per-block vector.

    Specified types get exactly one 1 in their block; unspecified types are
    an all-zero block.  Independent of the mapping's insertion order.
    """
    schema.validate_assignments(attrs)
    bits = np.zeros(schema.num_slots, dtype=np.float32)
    for type_name, value in attrs.items():
        bits[schema.slot(type_name, value)] = 1.0
    return bits


def decode_onehot(bits: np.ndarray, schema: AttributeSchema) -> dict[str, str]:
    """Read a full assignment back from a real vector via per-block argmax.

    Ties break to the lowest slot index, so an all-zero block decodes to the
    type's first value.
    """
    vec = np.asarray(bits, dtype=np.float64).reshape(-1)
    if vec.shape[0] != schema.num_slots:
        raise ValueError(
            f"expected vector of length {schema.num_slots}, got {vec.shape[0]}"
        )
    out: dict[str, str] = {}
    for spec in schema.types:
        block = vec[schema.block_slice(spec.name)]
        out[spec.name] = spec.values[int(np.argmax(block))]
    return out
