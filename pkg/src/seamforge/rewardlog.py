"""Append-only training traces with per-line checksums and exact replay checking.

Every training group (one instance's K candidates) is serialized as one JSON
line of the form ``{...}#crc32hex`` so partial writes are detectable without a
database.  The first line is a version header.  ``replay_check`` recomputes
the per-candidate mean rewards and the group advantages from the raw rollout
rewards stored in each trace and reports every mismatch beyond tolerance —
the audit trail for the normalization arithmetic.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import StorageError
from .grpo import compute_advantages
from .reward import aggregate_rewards

logger = logging.getLogger(__name__)

TRACE_FORMAT = "seamforge-group-trace"
TRACE_VERSION = 1
REPLAY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GroupTrace:
    """Serialized witness of one training group."""

    instance_id: str
    step: int
    candidate_texts: tuple[str, ...]
    candidate_token_counts: tuple[int, ...]
    rollout_rewards: tuple[tuple[float, ...], ...]
    mean_rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    delta: float
    loss_stats: dict

    def __post_init__(self) -> None:
        k = len(self.candidate_texts)
        aligned = (
            len(self.candidate_token_counts)
            == len(self.rollout_rewards)
            == len(self.mean_rewards)
            == len(self.advantages)
            == k
        )
        if not aligned:
            raise ValueError("per-candidate arrays must all have length K")
        if k and len({len(r) for r in self.rollout_rewards}) != 1:
            raise ValueError("every candidate must have the same rollout count M")


@dataclass(frozen=True)
class Discrepancy:
    """One replay mismatch (or unreadable line) in a trace log."""

    line_no: int
    instance_id: str | None
    field: str
    index: int | None
    detail: str


def _checksum(payload: str) -> str:
    return format(zlib.crc32(payload.encode("utf-8")) & 0xFFFFFFFF, "08x")


def _encode_line(obj: dict) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return f"{payload}#{_checksum(payload)}"


class TraceStore:
    """Single-appender checksummed JSONL store; readers may scan closed files."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self._fh = open(self.path, "a", encoding="utf-8")
            if fresh:
                self._write_line({"format": TRACE_FORMAT, "version": TRACE_VERSION})
        except OSError as exc:
            raise StorageError(f"cannot open trace log {self.path}: {exc}") from exc

    def _write_line(self, obj: dict) -> None:
        try:
            self._fh.write(_encode_line(obj) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to trace log {self.path}: {exc}") from exc

    def append_trace(self, trace: GroupTrace) -> None:
        self._write_line(asdict(trace))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _iter_lines(path: Path) -> Iterator[tuple[int, dict | None, str | None]]:
    """Yield (line_no, decoded object, error) for every line in the log."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if raw and not raw.endswith("\n"):
                yield line_no, None, "truncated final line (no newline)"
                return
            if not line:
                yield line_no, None, "blank line"
                continue
            payload, sep, checksum = line.rpartition("#")
            if not sep:
                yield line_no, None, "missing checksum suffix"
                continue
            if _checksum(payload) != checksum:
                yield line_no, None, "checksum mismatch"
                continue
            try:
                obj = json.loads(payload)
            except ValueError:
                yield line_no, None, "payload is not valid JSON"
                continue
            yield line_no, obj, None


def read_traces(path: str | Path) -> list[GroupTrace]:
    """All intact traces in order; corrupt lines are skipped with a warning."""
    traces: list[GroupTrace] = []
    for line_no, obj, error in _iter_lines(Path(path)):
        if error is not None:
            logger.warning("%s:%d: %s", path, line_no, error)
            continue
        if line_no == 1 and obj is not None and obj.get("format") == TRACE_FORMAT:
            continue
        assert obj is not None
        traces.append(
            GroupTrace(
                instance_id=obj["instance_id"],
                step=obj["step"],
                candidate_texts=tuple(obj["candidate_texts"]),
                candidate_token_counts=tuple(obj["candidate_token_counts"]),
                rollout_rewards=tuple(tuple(r) for r in obj["rollout_rewards"]),
                mean_rewards=tuple(obj["mean_rewards"]),
                advantages=tuple(obj["advantages"]),
                delta=obj["delta"],
                loss_stats=obj["loss_stats"],
            )
        )
    return traces


def replay_check(path: str | Path, *, tolerance: float = REPLAY_TOLERANCE) -> list[Discrepancy]:
    """Recompute reward means and advantages for every stored trace.

    Corrupt lines are reported as discrepancies and the scan continues; a
    truncated final line yields one report and ends the scan (prior traces
    are still validated).
    """
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        raise StorageError(f"trace log {path} is missing or empty")
    discrepancies: list[Discrepancy] = []
    saw_header = False
    for line_no, obj, error in _iter_lines(path):
        if error is not None:
            discrepancies.append(Discrepancy(line_no, None, "line", None, error))
            continue
        assert obj is not None
        if not saw_header and obj.get("format") == TRACE_FORMAT:
            saw_header = True
            if obj.get("version") != TRACE_VERSION:
                discrepancies.append(
                    Discrepancy(line_no, None, "header", None, f"unsupported version {obj.get('version')}")
                )
            continue
        instance_id = obj.get("instance_id")
        try:
            rollout_rewards = obj["rollout_rewards"]
            stored_means = obj["mean_rewards"]
            stored_advantages = obj["advantages"]
            delta = obj["delta"]
        except KeyError as exc:
            discrepancies.append(
                Discrepancy(line_no, instance_id, "line", None, f"missing field {exc}")
            )
            continue
        for index, rewards in enumerate(rollout_rewards):
            try:
                recomputed = aggregate_rewards(rewards)
            except ValueError as exc:
                discrepancies.append(
                    Discrepancy(line_no, instance_id, "rollout_rewards", index, str(exc))
                )
                continue
            if abs(recomputed - stored_means[index]) > tolerance:
                discrepancies.append(
                    Discrepancy(
                        line_no,
                        instance_id,
                        "mean_rewards",
                        index,
                        f"stored {stored_means[index]!r}, recomputed {recomputed!r}",
                    )
                )
        try:
            recomputed_adv = compute_advantages(np.asarray(stored_means), delta).values
        except ValueError as exc:
            discrepancies.append(
                Discrepancy(line_no, instance_id, "advantages", None, str(exc))
            )
            continue
        for index, value in enumerate(stored_advantages):
            if abs(recomputed_adv[index] - value) > tolerance:
                discrepancies.append(
                    Discrepancy(
                        line_no,
                        instance_id,
                        "advantages",
                        index,
                        f"stored {value!r}, recomputed {recomputed_adv[index]!r}",
                    )
                )
    return discrepancies
