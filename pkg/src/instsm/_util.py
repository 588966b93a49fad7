"""Small shared helpers: an immutable hashable mapping and canonical ordering."""
from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator, Mapping
from typing import Any, TypeVar

K = TypeVar("K")
V = TypeVar("V")

DEFAULT_CAP = 200_000


class FrozenMap(Mapping[K, V]):
    """Read-only mapping that hashes and compares by content."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping[K, V] | Iterable[tuple[K, V]] = ()):
        self._data = dict(data)
        self._hash: int | None = None

    def __getitem__(self, key: K) -> V:
        return self._data[key]

    def __iter__(self) -> Iterator[K]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Mapping):
            return self._data == dict(other.items())
        return NotImplemented

    def __repr__(self) -> str:
        return f"FrozenMap({self._data!r})"


def sort_key(obj: Any) -> str:
    """Total order over heterogeneous values (str states vs. tuple states etc.)."""
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def canonical(items: Iterable[Any]) -> list[Any]:
    return sorted(items, key=sort_key)


def jsonable(obj: Any) -> Any:
    """Best-effort conversion of library values to JSON-compatible data."""
    to_json = getattr(obj, "to_json", None)
    if callable(to_json):
        return to_json()
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (frozenset, set)):
        return sorted((jsonable(x) for x in obj), key=lambda x: json.dumps(x, sort_keys=True))
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON text (sorted keys, stable separators)."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2)


def env_cap(default: int = DEFAULT_CAP) -> int:
    """Global enumeration ceiling, overridable via ``INSTSM_CAP``."""
    raw = os.environ.get("INSTSM_CAP")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            return default
        if value > 0:
            return value
    return default
