"""Bundled example configs shipped inside the package."""

from __future__ import annotations

from pathlib import Path

CONFIG_DIR = Path(__file__).parent / "configs"


def list_examples() -> list[tuple[str, Path]]:
    return [(p.stem, p) for p in sorted(CONFIG_DIR.glob("*.yaml"))]


def example_path(name: str) -> Path | None:
    path = CONFIG_DIR / f"{name}.yaml"
    return path if path.is_file() else None
