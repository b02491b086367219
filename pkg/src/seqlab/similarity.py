"""Similarity retrieval: rank unlabeled videos against labeled anchors.

Scores blend event-sequence edit similarity with embedding cosine
similarity: sim_total = w * sim_e + (1 - w) * sim_v.  Candidates are scored
against every anchor and keep their best match, so each result carries the
anchor that explains it.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .mindl import edit_cost
from .types import Dataset, SymbolString


@dataclass(frozen=True)
class SimilarityWeights:
    """Blend weight: w toward edit similarity, 1 - w toward embeddings."""

    w: float = 0.5
    aggregate: str = "max"

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"w must be within [0, 1], got {self.w}")
        if self.aggregate not in ("max", "mean"):
            raise ValueError(f"aggregate must be 'max' or 'mean', got {self.aggregate!r}")


@dataclass(frozen=True)
class RetrievalEntry:
    video_id: str
    sim_total: float
    sim_e: float
    sim_v: float
    best_anchor_id: str


RetrievalResult = list[RetrievalEntry]


def sim_e(a: SymbolString, b: SymbolString) -> float:
    """Edit similarity: 1 - distance / max length.  Two empty strings match."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_cost(a, b) / longest


def sim_v(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity clamped to [0, 1]; negatives count as unrelated."""
    uu = np.asarray(u, dtype=float)
    vv = np.asarray(v, dtype=float)
    if uu.shape != vv.shape or uu.ndim != 1:
        raise ValueError(f"dimension mismatch: {uu.shape} vs {vv.shape}")
    nu = float(np.linalg.norm(uu))
    nv = float(np.linalg.norm(vv))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return max(0.0, min(1.0, float(uu @ vv) / (nu * nv)))


def _pair_scores(
    a_id: str, b_id: str, dataset: Dataset, weights: SimilarityWeights
) -> tuple[float, float, float]:
    """(sim_total, sim_e, sim_v) for one pair of video ids."""
    symbols = dataset.symbol_map()
    for vid in (a_id, b_id):
        if vid not in symbols:
            raise KeyError(f"unknown video id {vid!r}")
    e = sim_e(symbols[a_id], symbols[b_id])
    if weights.w == 1.0:
        return e, e, 0.0
    embeddings = dataset.embeddings or {}
    missing = [vid for vid in (a_id, b_id) if vid not in embeddings]
    if missing:
        raise ValueError(f"missing embeddings for {missing} with w={weights.w} < 1")
    v = sim_v(embeddings[a_id], embeddings[b_id])
    return weights.w * e + (1.0 - weights.w) * v, e, v


def sim_total(
    a_id: str, b_id: str, dataset: Dataset, weights: SimilarityWeights | None = None
) -> float:
    total, _, _ = _pair_scores(a_id, b_id, dataset, weights or SimilarityWeights())
    return total


def retrieve(
    anchors: Iterable[str],
    candidates: Iterable[str],
    dataset: Dataset,
    weights: SimilarityWeights | None = None,
    top_k: int | None = None,
) -> RetrievalResult:
    """Rank candidates by similarity to the anchor set.

    Each candidate's score aggregates its per-anchor sim_total (max by
    default, mean if configured); best_anchor_id is always the argmax anchor.
    Results sort by descending sim_total, then ascending video_id.
    """
    weights = weights or SimilarityWeights()
    anchor_ids = sorted(set(anchors))
    candidate_ids = sorted(set(candidates))
    if not anchor_ids:
        raise ValueError("retrieve requires at least one anchor")
    overlap = set(anchor_ids) & set(candidate_ids)
    if overlap:
        raise ValueError(f"anchors and candidates must be disjoint: {sorted(overlap)}")
    entries: RetrievalResult = []
    for cid in candidate_ids:
        scored = [(_pair_scores(aid, cid, dataset, weights), aid) for aid in anchor_ids]
        (best_total, best_e, best_v), best_anchor = min(
            scored, key=lambda item: (-item[0][0], item[1])
        )
        if weights.aggregate == "mean":
            best_total = sum(score[0] for score, _ in scored) / len(scored)
        entries.append(
            RetrievalEntry(
                video_id=cid,
                sim_total=best_total,
                sim_e=best_e,
                sim_v=best_v,
                best_anchor_id=best_anchor,
            )
        )
    entries.sort(key=lambda r: (-r.sim_total, r.video_id))
    if top_k is not None:
        entries = entries[:top_k]
    return entries
