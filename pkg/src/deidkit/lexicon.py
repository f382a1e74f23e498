"""Word lists (names, streets, suburbs) shipped as plain-text data files."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

LEXICON_NAMES = ("first_names", "last_names", "streets", "suburbs")

STREET_TYPES = ("Street", "Road", "Avenue", "Lane", "Drive", "Crescent",
                "Court", "Place")
HONORIFICS = ("Dr", "Prof", "Mr", "Mrs", "Ms")


@lru_cache(maxsize=None)
def load_list(name: str) -> tuple[str, ...]:
    """Lines of data/<name>.txt in file order."""
    if name not in LEXICON_NAMES:
        raise KeyError(f"unknown lexicon {name!r}")
    text = (resources.files("deidkit") / "data" / f"{name}.txt").read_text("utf-8")
    return tuple(w for w in text.splitlines() if w)


@lru_cache(maxsize=None)
def load_set(name: str) -> frozenset[str]:
    """Lowercased membership set for gazetteer lookups."""
    return frozenset(w.lower() for w in load_list(name))
