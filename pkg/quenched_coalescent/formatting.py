"""Text formats for partitions, paintboxes and event lists."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def format_float(x: float) -> str:
    """Shortest text that reads back to the same double."""
    x = float(x)
    if x == np.inf:
        return "inf"
    return repr(x)


def format_partition(blocks: Iterable[Sequence[int]]) -> str:
    """
    Format blocks as ``{1,3|2}``.

    An empty partition (n = 0) is written ``{}``.
    """
    return "{" + "|".join(",".join(str(i) for i in block) for block in blocks) + "}"


def parse_partition(text: str) -> list[list[int]]:
    """Inverse of :func:`format_partition`."""
    text = text.strip()
    if len(text) < 2 or text[0] != "{" or text[-1] != "}":
        raise ValueError(f"not a partition: {text!r}")
    body = text[1:-1].strip()
    if not body:
        return []
    blocks = []
    for chunk in body.split("|"):
        items = [c.strip() for c in chunk.split(",")]
        if not all(items):
            raise ValueError(f"empty element in partition {text!r}")
        blocks.append([int(i) for i in items])
    return blocks


def format_weights(weights: Iterable[float]) -> str:
    return " ".join(format_float(w) for w in weights)


def format_event(t: float, blocks: Iterable[Sequence[int]]) -> str:
    """One line of an event list: ``t <partition-text>``."""
    return f"{format_float(t)} {format_partition(blocks)}"


def parse_event(line: str) -> tuple[float, list[list[int]]]:
    head, _, rest = line.strip().partition(" ")
    return float(head), parse_partition(rest)
