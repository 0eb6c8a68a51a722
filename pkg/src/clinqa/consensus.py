"""Deterministic aggregation of stochastic runs.

Two aggregation rules operate on a :class:`VoteTally` built from R runs:
binary majority voting over items, and dual-filter link retention (vote
quorum AND mean confidence strictly above a threshold).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import AbstractSet, Hashable, Iterable, Mapping, Sequence

from .errors import ValidationError
from .model import AlignmentLink


def quorum(runs: int) -> int:
    """Minimum number of supporting runs an item needs: ceil(R/2)."""
    return math.ceil(runs / 2)


@dataclass(frozen=True)
class VoteTally:
    """Per-item vote counts (and, for links, per-emitting-run confidences)."""

    runs: int
    votes: Mapping[Hashable, int]
    confidences: Mapping[Hashable, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.runs < 1:
            raise ValidationError(f"tally needs at least one run, got {self.runs}")
        object.__setattr__(self, "votes", dict(self.votes))
        object.__setattr__(self, "confidences", {k: tuple(v) for k, v in self.confidences.items()})
        for key, count in self.votes.items():
            if not 0 <= count <= self.runs:
                raise ValidationError(f"vote count {count} for {key!r} outside [0, {self.runs}]")
        for key, confs in self.confidences.items():
            if len(confs) != self.votes.get(key, 0):
                raise ValidationError(f"{key!r}: {len(confs)} confidences for {self.votes.get(key, 0)} votes")
            if any(not 0.0 <= c <= 1.0 for c in confs):
                raise ValidationError(f"{key!r}: confidence outside [0, 1]")

    @classmethod
    def from_item_runs(cls, run_sets: Sequence[AbstractSet[Hashable]], runs: int | None = None) -> "VoteTally":
        """Tally one emitted-item set per run (a run's vote is 1 iff it emitted the item)."""
        total = len(run_sets) if runs is None else runs
        votes: dict[Hashable, int] = {}
        for emitted in run_sets:
            for key in emitted:
                votes[key] = votes.get(key, 0) + 1
        return cls(runs=total, votes=votes)

    @classmethod
    def from_link_runs(cls, run_links: Sequence[Iterable[AlignmentLink]], runs: int | None = None) -> "VoteTally":
        """Tally per-run link sets, keeping one confidence per emitting run.

        A pair emitted twice within one run counts once (first confidence wins).
        """
        total = len(run_links) if runs is None else runs
        votes: dict[tuple[int, int], int] = {}
        confs: dict[tuple[int, int], list[float]] = {}
        for links in run_links:
            seen: set[tuple[int, int]] = set()
            for link in links:
                if link.pair in seen:
                    continue
                seen.add(link.pair)
                votes[link.pair] = votes.get(link.pair, 0) + 1
                confs.setdefault(link.pair, []).append(link.confidence)
        return cls(runs=total, votes=votes, confidences={k: tuple(v) for k, v in confs.items()})


def majority_vote(tally: VoteTally) -> set[Hashable]:
    """Items whose vote count meets the ceil(R/2) quorum."""
    need = quorum(tally.runs)
    return {key for key, count in tally.votes.items() if count >= need}


@dataclass(frozen=True)
class LinkDecision:
    """The aggregation verdict for one candidate link."""

    link: AlignmentLink
    votes: int
    retained: bool


def aggregate_links(tally: VoteTally, tau_c: float, denominator: str = "emitters") -> list[LinkDecision]:
    """Decide every candidate link by the dual filter.

    A link is retained iff it has at least ceil(R/2) votes AND its mean
    confidence is strictly greater than ``tau_c``. By default the mean is
    taken over the runs that emitted the link; ``denominator="all_runs"``
    divides by R instead (absent runs contribute zeros). Output is sorted
    by (answer_id, note_id) and independent of run order.
    """
    if not 0.0 <= tau_c <= 1.0:
        raise ValidationError(f"tau_c {tau_c} outside [0, 1]")
    if denominator not in ("emitters", "all_runs"):
        raise ValueError(f"unknown denominator mode '{denominator}'")
    need = quorum(tally.runs)
    decisions = []
    for pair in sorted(tally.votes):
        votes = tally.votes[pair]
        confs = tally.confidences.get(pair, ())
        if confs:
            mean = statistics.fmean(confs) if denominator == "emitters" else math.fsum(confs) / tally.runs
        else:
            mean = 0.0
        retained = votes >= need and mean > tau_c
        answer_id, note_id = pair
        decisions.append(LinkDecision(AlignmentLink(answer_id, note_id, mean), votes, retained))
    return decisions


def retained_links(decisions: Iterable[LinkDecision]) -> list[AlignmentLink]:
    """Just the links that survived the dual filter."""
    return [d.link for d in decisions if d.retained]
