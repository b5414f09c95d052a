"""Access to the bundled channel profiles, constants and experiment plans."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import MissingProfileError
from .ggd import ConstellationProfile

TABLE2_TAGS = "abcdefghijklmnop"
TABLE4_NS = tuple(range(1, 9))


def _data() -> Path:
    return Path(str(resources.files("lcac") / "data"))


def _read(rel: str) -> dict:
    path = _data() / rel
    if not path.exists():
        raise MissingProfileError(f"bundled data file {rel!r} not found")
    return json.loads(path.read_text())


def table2(tag: str) -> ConstellationProfile:
    return ConstellationProfile.from_dict(_read(f"profiles/table2_{tag}.json"))


def table2_profiles() -> dict[str, ConstellationProfile]:
    return {tag: table2(tag) for tag in TABLE2_TAGS}


def table4(ns: int) -> ConstellationProfile:
    return ConstellationProfile.from_dict(_read(f"profiles/table4_ns{ns}.json"))


def table4_series() -> dict[int, ConstellationProfile]:
    return {ns: table4(ns) for ns in TABLE4_NS}


def fig15_constants() -> dict:
    return _read("fig15_constants.json")


def plan_path(name: str) -> Path:
    return _data() / "plans" / f"{name}.json"


def bundled_plans() -> list[str]:
    return sorted(p.stem for p in (_data() / "plans").glob("*.json"))


def resolve_profile(ref: str) -> ConstellationProfile:
    """``table2:a``, ``table4:8`` or a path to a profile JSON file."""
    if ref.startswith("table2:"):
        return table2(ref.split(":", 1)[1])
    if ref.startswith("table4:"):
        return table4(int(ref.split(":", 1)[1]))
    path = Path(ref)
    if not path.exists():
        raise MissingProfileError(f"profile {ref!r} not found")
    return ConstellationProfile.load(path)
