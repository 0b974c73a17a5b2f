"""Problem instances: generation, validation and JSON-lines persistence.

An instance holds ``num_offline`` offline items with integer capacities,
an optional per-item weight cap (``UNBOUNDED`` when unknown) and an ordered
sequence of arrivals.  Arrival ``v`` is a row of ``num_offline`` non-negative
weights; a zero weight means "no edge".

Generator recipe
----------------
The synthetic generator is driven by :class:`SplitMix64` so that golden
instances can be reproduced bit-for-bit in any language:

1. one uniform draw per offline item, in index order, for its capacity
   ``lo + floor(r * (hi - lo + 1))``;
2. then, arrival-major and offline-minor, two draws per edge: a sparsity
   coin ``r1`` and a weight draw ``r2``.  The weight is ``0.0`` when
   ``r1 < sparsity`` and ``low + (high - low) * r2`` otherwise.  Both draws
   are always consumed.

Uniform reals are ``(x >> 11) * 2**-53`` for each 64-bit output ``x``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNBOUNDED = math.inf

_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid generator configuration; ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InstanceParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InstanceValidationError(ValueError):
    def __init__(self, violations: Sequence[str], line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + "; ".join(violations))
        self.violations = list(violations)
        self.line = line


class SplitMix64:
    """Steele, Lea and Flood's SplitMix64 generator (64-bit state)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """A double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


@dataclass(eq=False)
class ProblemInstance:
    capacities: np.ndarray
    weight_caps: np.ndarray
    weights: np.ndarray  # shape (num_online, num_offline)

    def __post_init__(self):
        self.capacities = np.asarray(self.capacities, dtype=np.int64)
        self.weight_caps = np.asarray(
            [UNBOUNDED if c is None else c for c in np.asarray(self.weight_caps, dtype=object)],
            dtype=np.float64,
        )
        w = np.asarray(self.weights, dtype=np.float64)
        if w.size == 0:
            w = w.reshape(0, len(self.capacities))
        self.weights = w

    @property
    def num_offline(self) -> int:
        return len(self.capacities)

    @property
    def num_online(self) -> int:
        return self.weights.shape[0]

    @property
    def arrivals(self) -> np.ndarray:
        return self.weights

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            np.array_equal(self.capacities, other.capacities)
            and np.array_equal(self.weight_caps, other.weight_caps)
            and self.weights.shape == other.weights.shape
            and np.array_equal(self.weights, other.weights)
        )

    def to_record(self) -> dict:
        return {
            "num_offline": self.num_offline,
            "capacities": [int(c) for c in self.capacities],
            "w_max": [None if math.isinf(c) else float(c) for c in self.weight_caps],
            "arrivals": [[float(x) for x in row] for row in self.weights],
        }

    @classmethod
    def from_record(cls, record: dict) -> "ProblemInstance":
        return cls(
            capacities=record["capacities"],
            weight_caps=record["w_max"],
            weights=record["arrivals"],
        )


@dataclass(frozen=True)
class GeneratorConfig:
    num_offline: int
    num_online: int
    capacity_range: tuple[int, int] = (1, 1)
    weight_low: float = 0.0
    weight_high: float = 1.0
    sparsity: float = 0.0
    seed: int = 0

    def check(self) -> None:
        if self.num_offline < 1:
            raise ConfigError("num_offline", "must be >= 1")
        if self.num_online < 0:
            raise ConfigError("num_online", "must be >= 0")
        lo, hi = self.capacity_range
        if lo < 1 or hi < lo:
            raise ConfigError("capacity_range", f"need 1 <= lo <= hi, got ({lo}, {hi})")
        if not (math.isfinite(self.weight_low) and self.weight_low >= 0):
            raise ConfigError("weight_low", "must be finite and >= 0")
        if not (math.isfinite(self.weight_high) and self.weight_high >= self.weight_low):
            raise ConfigError("weight_high", "must be finite and >= weight_low")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigError("sparsity", "must lie in [0, 1]")
        if not 0 <= self.seed <= _MASK64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")


def generate_instance(config: GeneratorConfig) -> ProblemInstance:
    config.check()
    rng = SplitMix64(config.seed)
    lo, hi = config.capacity_range
    caps = [lo + min(int(rng.uniform() * (hi - lo + 1)), hi - lo) for _ in range(config.num_offline)]
    span = config.weight_high - config.weight_low
    weights = np.empty((config.num_online, config.num_offline))
    for v in range(config.num_online):
        for u in range(config.num_offline):
            coin = rng.uniform()
            draw = rng.uniform()
            weights[v, u] = 0.0 if coin < config.sparsity else config.weight_low + span * draw
    return ProblemInstance(
        capacities=caps,
        weight_caps=[config.weight_high] * config.num_offline,
        weights=weights,
    )


def generate_instances(config: GeneratorConfig, count: int) -> list[ProblemInstance]:
    """``count`` instances; instance ``k`` uses seed ``config.seed + k``."""
    out = []
    for k in range(count):
        cfg = GeneratorConfig(
            config.num_offline,
            config.num_online,
            config.capacity_range,
            config.weight_low,
            config.weight_high,
            config.sparsity,
            (config.seed + k) & _MASK64,
        )
        out.append(generate_instance(cfg))
    return out


def _is_real(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


def validate_record(record) -> list[str]:
    """All violations of a raw (JSON-decoded) instance record; empty if valid."""
    if not isinstance(record, dict):
        return ["instance must be a JSON object"]
    missing = [k for k in ("num_offline", "capacities", "w_max", "arrivals") if k not in record]
    if missing:
        return [f"missing key {k!r}" for k in missing]
    problems = []
    n = record["num_offline"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        problems.append(f"num_offline must be a positive integer, got {n!r}")
        n = None
    caps = record["capacities"]
    w_max = record["w_max"]
    arrivals = record["arrivals"]
    if not isinstance(caps, list):
        problems.append("capacities must be a list")
        caps = []
    if not isinstance(w_max, list):
        problems.append("w_max must be a list")
        w_max = []
    if not isinstance(arrivals, list):
        problems.append("arrivals must be a list")
        arrivals = []
    if n is not None:
        if len(caps) != n:
            problems.append(f"capacities has length {len(caps)}, expected {n}")
        if len(w_max) != n:
            problems.append(f"w_max has length {len(w_max)}, expected {n}")
    for u, c in enumerate(caps):
        if not isinstance(c, (int, np.integer)) or isinstance(c, bool) or c < 1:
            problems.append(f"capacity must be ≥ 1 at index {u}")
    bounds = []
    for u, c in enumerate(w_max):
        if c is None:
            bounds.append(UNBOUNDED)
        elif not _is_real(c) or not math.isfinite(c) or c < 0:
            problems.append(f"w_max must be null or a finite non-negative real at index {u}")
            bounds.append(UNBOUNDED)
        else:
            bounds.append(float(c))
    for v, row in enumerate(arrivals):
        if not isinstance(row, list):
            problems.append(f"arrival {v} must be a list")
            continue
        if n is not None and len(row) != n:
            problems.append(f"arrival {v} has length {len(row)}, expected {n}")
        for u, w in enumerate(row):
            if not _is_real(w) or not math.isfinite(w):
                problems.append(f"weight at (u={u}, v={v}) must be a finite real")
            elif w < 0:
                problems.append(f"weight at (u={u}, v={v}) is negative: {w!r}")
            elif u < len(bounds) and w > bounds[u]:
                problems.append(f"weight at (u={u}, v={v}) is {w!r}, above cap {bounds[u]!r}")
    return problems


def validate(instance: ProblemInstance) -> list[str]:
    """Every invariant violation of ``instance``; an empty list means ok."""
    problems = []
    caps = instance.capacities
    w = instance.weights
    n = len(caps)
    if n < 1:
        problems.append("num_offline must be >= 1")
    if len(instance.weight_caps) != n:
        problems.append(f"w_max has length {len(instance.weight_caps)}, expected {n}")
    if w.ndim != 2 or (w.shape[0] and w.shape[1] != n):
        problems.append(f"arrivals must have shape (num_online, {n}), got {w.shape}")
        return problems
    for u in np.flatnonzero(caps < 1):
        problems.append(f"capacity must be ≥ 1 at index {u}")
    for u in np.flatnonzero(np.isnan(instance.weight_caps) | (instance.weight_caps < 0)):
        problems.append(f"w_max must be non-negative at index {u}")
    for v, u in zip(*np.nonzero(~np.isfinite(w))):
        problems.append(f"weight at (u={u}, v={v}) must be a finite real")
    for v, u in zip(*np.nonzero(w < 0)):
        problems.append(f"weight at (u={u}, v={v}) is negative: {w[v, u]!r}")
    if len(instance.weight_caps) == n:
        for v, u in zip(*np.nonzero(w > instance.weight_caps[None, :])):
            problems.append(
                f"weight at (u={u}, v={v}) is {w[v, u]!r}, above cap {instance.weight_caps[u]!r}"
            )
    return problems


def dumps_instance(instance: ProblemInstance) -> str:
    return json.dumps(instance.to_record(), separators=(",", ":"), allow_nan=False)


def save_instances(instances: Iterable[ProblemInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(dumps_instance(inst))
            fh.write("\n")


def load_instances(path) -> list[ProblemInstance]:
    """Read a JSON-lines instance file.  Blank lines are ignored."""
    out = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InstanceParseError(lineno, f"malformed JSON ({exc.msg})") from None
        problems = validate_record(record)
        if problems:
            raise InstanceValidationError(problems, line=lineno)
        out.append(ProblemInstance.from_record(record))
    return out


def persist_round_trip(instances: Sequence[ProblemInstance], path) -> list[ProblemInstance]:
    save_instances(instances, path)
    return load_instances(path)
