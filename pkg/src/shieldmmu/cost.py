"""Tick accounting.

The simulator has no pipeline; each architectural event is charged a
fixed number of ticks from a :class:`CostModel`.  Absolute values mean
nothing outside this simulator, only their ratios do.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass(frozen=True)
class CostModel:
    tlb_hit: int = 1
    pt_level_access: int = 20
    mem_access: int = 10
    hash_node: int = 400
    os_fault: int = 1000
    swap_io: int = 100_000

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"cost {f.name}={value!r} must be a non-negative integer")

    @classmethod
    def from_mapping(cls, data: dict) -> CostModel:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown cost fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> CostModel:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read cost model {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("cost model file must hold a JSON object")
        return cls.from_mapping(data)

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


class SimClock:
    """Monotonic tick counter shared by MMU and OS of one scenario.

    ``by_tag`` splits the total by who caused the work; the MMU tags
    its verification and tree maintenance with ``"defense"``.
    """

    def __init__(self, cost_model: CostModel | None = None) -> None:
        self.cost = cost_model or CostModel()
        self.ticks = 0
        self.by_kind: Counter[str] = Counter()
        self.by_tag: Counter[str] = Counter()

    def charge(self, kind: str, count: int = 1, tag: str | None = None) -> int:
        amount = getattr(self.cost, kind) * count
        self.ticks += amount
        self.by_kind[kind] += amount
        if tag is not None:
            self.by_tag[tag] += amount
        return amount
