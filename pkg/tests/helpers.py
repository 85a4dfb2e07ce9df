"""Shared oracles and generators for the test suite.

The oracles here are deliberately independent of the library paths they
check: minimal Hamming distance by full enumeration, subset scans, and
hand-rolled random instances driven by ``random.Random`` seeds.
"""

from __future__ import annotations

import io
import json
import random
from contextlib import redirect_stdout

from linkmech import (
    Message,
    PreferenceVector,
    Quota,
    enumerate_messages,
    lie_count,
)
from linkmech.cli import main

LABELS = ("A", "B", "C", "D", "E", "F")


def brute_min_hamming(u: PreferenceVector, q: Quota) -> int:
    """Independent oracle: minimum lies over every quota-feasible message."""
    return min(lie_count(u, m) for m in enumerate_messages(q, cap=10**7))


def brute_minimal_set(u: PreferenceVector, q: Quota) -> set[tuple[str, ...]]:
    best = brute_min_hamming(u, q)
    return {
        m.entries for m in enumerate_messages(q, cap=10**7) if lie_count(u, m) == best
    }


def random_vector(rnd: random.Random, types: tuple[str, ...], K: int) -> PreferenceVector:
    return PreferenceVector(tuple(rnd.choice(types) for _ in range(K)), types)


def random_quota(rnd: random.Random, types: tuple[str, ...], K: int) -> Quota:
    """A uniformly random composition of K over the type set."""
    cuts = sorted(rnd.randint(0, K) for _ in range(len(types) - 1))
    bounds = [0, *cuts, K]
    counts = {t: bounds[i + 1] - bounds[i] for i, t in enumerate(sorted(types))}
    return Quota.from_counts(counts)


def random_quota_message(rnd: random.Random, u: PreferenceVector, q: Quota) -> Message:
    entries = [t for t, c in zip(q.types, q.counts) for _ in range(c)]
    rnd.shuffle(entries)
    return Message(PreferenceVector(tuple(entries), u.types), q)


def run_cli(argv: list[str]) -> tuple[int, str]:
    """Invoke the CLI in-process, returning (exit code, captured stdout)."""
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def run_cli_json(argv: list[str]) -> tuple[int, dict]:
    code, out = run_cli(argv)
    return code, json.loads(out)
