"""The shipped game catalog: assets, deception metadata, scripted policies."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from typing import Union

from ..gdl import GameSpec, LevelMap, ParseError, parse_game, parse_level

GAME_IDS = ("DC1", "DC2", "DC3", "Mints", "Flower", "Invest")


class DeceptionTag(enum.Enum):
    LACK_OF_HIERARCHICAL_UNDERSTANDING = "LackOfHierarchicalUnderstanding"
    SUBVERTED_GENERALIZATION = "SubvertedGeneralization"
    DELAYED_REWARD = "DelayedReward"
    DELAYED_GRATIFICATION = "DelayedGratification"


@dataclass(frozen=True)
class GameCatalogEntry:
    id: str
    spec_path: str  # relative to the assets root, e.g. "decepticoins/game.dgdl"
    level_path: str
    tags: tuple[DeceptionTag, ...]
    optimal_score: Union[int, str]  # int, or "stochastic-bound"
    trap_score: int


def _asset_text(rel_path: str) -> str:
    root = resources.files(__package__) / "assets"
    return (root / rel_path).read_text(encoding="utf-8")


def _parse_manifest(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
        elif "=" in line and current is not None:
            key, _, value = line.partition("=")
            current[key.strip()] = value.strip()
        else:
            raise ParseError("syntax", f"bad catalog line {raw!r}", line_no)
    return sections


def load_catalog() -> list[GameCatalogEntry]:
    """Parse the catalog manifest and validate every referenced asset."""
    sections = _parse_manifest(_asset_text("catalog.toml"))
    entries = []
    for game_id in GAME_IDS:
        row = sections[game_id]
        spec_path = f"{row['dir']}/{row['spec']}"
        level_path = f"{row['dir']}/{row['level']}"
        try:
            spec = parse_game(_asset_text(spec_path))
            parse_level(_asset_text(level_path), spec)
        except ParseError as err:
            raise ParseError(err.kind, f"{spec_path}: {err}", err.line, err.col) from err
        tags = tuple(
            DeceptionTag(tag.strip()) for tag in row["tags"].split(",") if tag.strip()
        )
        optimal: Union[int, str] = row["optimal"]
        if optimal != "stochastic-bound":
            optimal = int(optimal)
        entries.append(
            GameCatalogEntry(
                id=game_id,
                spec_path=spec_path,
                level_path=level_path,
                tags=tags,
                optimal_score=optimal,
                trap_score=int(row["trap"]),
            )
        )
    return entries


def catalog_entry(game_id: str) -> GameCatalogEntry:
    for entry in load_catalog():
        if entry.id == game_id:
            return entry
    raise KeyError(f"unknown game id {game_id!r}; known: {', '.join(GAME_IDS)}")


def load_game(game_id: str) -> tuple[GameSpec, LevelMap]:
    """Load and validate the spec and level for one catalog entry."""
    entry = catalog_entry(game_id)
    spec = parse_game(_asset_text(entry.spec_path))
    level = parse_level(_asset_text(entry.level_path), spec)
    return spec, level


def asset_texts(game_id: str) -> tuple[str, str]:
    """Raw (game, level) document texts, e.g. for replay asset hashing."""
    entry = catalog_entry(game_id)
    return _asset_text(entry.spec_path), _asset_text(entry.level_path)


from .oracles import naive_policy, oracle_policy  # noqa: E402  (re-export)

__all__ = [
    "DeceptionTag",
    "GameCatalogEntry",
    "GAME_IDS",
    "load_catalog",
    "catalog_entry",
    "load_game",
    "asset_texts",
    "oracle_policy",
    "naive_policy",
]
