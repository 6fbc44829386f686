"""Exact Viterbi decoding over compiled state graphs.

Path score = emission(0, s0) + sum_t [arc(s_{t-1} -> s_t) + emission(t, s_t)];
entering the graph costs nothing. Ties between equal-scoring paths break
toward the earlier transition: during the backward pass the predecessor with
the larger node index wins, which picks the path that enters each state
soonest (equivalently, the tied path whose reversed state sequence is
lexicographically largest).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

KIND_WORD, KIND_SIL, KIND_MUS = 0, 1, 2


class NoPathError(ValueError):
    """No admissible path: the utterance is too short for the graph."""


@dataclass
class DecodeGraph:
    """Flattened emitting-state graph compiled from a transcript."""

    node_pdf: np.ndarray
    node_phone: np.ndarray
    node_state: np.ndarray
    node_word: np.ndarray
    node_kind: np.ndarray
    arc_src: np.ndarray
    arc_dst: np.ndarray
    arc_kind: np.ndarray
    start_nodes: np.ndarray
    final_nodes: np.ndarray
    words: tuple[str, ...] = ()
    word_lines: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("node_pdf", "node_phone", "node_state", "node_word", "node_kind",
                     "arc_src", "arc_dst", "arc_kind", "start_nodes", "final_nodes"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        # arcs sorted by destination, sources descending: the first arc of each
        # group that attains the group maximum realizes the tie-break rule
        order = np.lexsort((-self.arc_src, self.arc_dst))
        self.arc_src = self.arc_src[order]
        self.arc_dst = self.arc_dst[order]
        self.arc_kind = self.arc_kind[order]
        boundaries = np.flatnonzero(np.diff(self.arc_dst)) + 1
        self._group_starts = np.concatenate([[0], boundaries])
        self._group_dst = self.arc_dst[self._group_starts]
        # prefer larger node index at final-score ties (latest entry point wins
        # reversed-lexicographic comparison)
        self.final_nodes = np.sort(self.final_nodes)[::-1]

    @property
    def n_nodes(self) -> int:
        return self.node_pdf.size

    @property
    def n_arcs(self) -> int:
        return self.arc_src.size

    def min_path_frames(self) -> int:
        """Length of the shortest admissible path (breadth-first over arcs)."""
        dist = np.full(self.n_nodes, np.inf)
        dist[self.start_nodes] = 1
        for _ in range(self.n_nodes):
            cand = dist[self.arc_src] + 1
            updated = cand < dist[self.arc_dst]
            if not updated.any():
                break
            np.minimum.at(dist, self.arc_dst[updated], cand[updated])
        return int(dist[self.final_nodes].min())


@dataclass
class DecodeResult:
    node_path: np.ndarray
    pdf_path: np.ndarray
    arc_path: np.ndarray  # arc index taken into each frame t >= 1
    score: float
    frame_scores: np.ndarray = None  # per-frame score contributions, sums to score
    subsample: int = 1


def viterbi_decode(graph: DecodeGraph, emissions: np.ndarray, arc_logprob: np.ndarray,
                   beam: float | None = None) -> DecodeResult:
    """Best path through the graph given (frames, n_pdfs) emission log liks."""
    n_frames = emissions.shape[0]
    if n_frames == 0:
        raise NoPathError("no frames to decode")
    node_emis = emissions[:, graph.node_pdf]
    delta = np.full(graph.n_nodes, -np.inf)
    delta[graph.start_nodes] = node_emis[0, graph.start_nodes]
    backptr = np.full((n_frames, graph.n_nodes), -1, dtype=np.int64)
    arc_ids = np.arange(graph.n_arcs)
    starts = graph._group_starts
    group_dst = graph._group_dst
    for t in range(1, n_frames):
        cand = delta[graph.arc_src] + arc_logprob
        best = np.maximum.reduceat(cand, starts)
        expanded = np.repeat(best, np.diff(np.concatenate([starts, [graph.n_arcs]])))
        first_arc = np.minimum.reduceat(np.where(cand == expanded, arc_ids, graph.n_arcs), starts)
        new_delta = np.full(graph.n_nodes, -np.inf)
        new_delta[group_dst] = best + node_emis[t, group_dst]
        backptr[t, group_dst] = first_arc
        if beam is not None:
            top = new_delta.max()
            new_delta[new_delta < top - beam] = -np.inf
        delta = new_delta
    final_scores = delta[graph.final_nodes]
    k = int(np.argmax(final_scores))
    score = final_scores[k]
    if not np.isfinite(score):
        raise NoPathError(
            f"no admissible path for {n_frames} frames (graph needs >= {graph.min_path_frames()})")
    node_path = np.empty(n_frames, dtype=np.int64)
    arc_path = np.empty(max(n_frames - 1, 0), dtype=np.int64)
    node = int(graph.final_nodes[k])
    node_path[n_frames - 1] = node
    for t in range(n_frames - 1, 0, -1):
        arc = backptr[t, node]
        arc_path[t - 1] = arc
        node = int(graph.arc_src[arc])
        node_path[t - 1] = node
    frame_scores = np.empty(n_frames)
    frame_scores[0] = node_emis[0, node_path[0]]
    if n_frames > 1:
        frame_scores[1:] = (arc_logprob[arc_path]
                            + node_emis[np.arange(1, n_frames), node_path[1:]])
    return DecodeResult(node_path, graph.node_pdf[node_path], arc_path, float(score),
                        frame_scores)


def force_align_states(model, values: np.ndarray, graph: DecodeGraph,
                       use_mlp: bool = False, beam: float | None = None) -> DecodeResult:
    """Viterbi-align features to a compiled graph; score is the path log likelihood."""
    if beam is not None:
        warnings.warn("beam pruning sacrifices exact optimality", stacklevel=2)
    emissions, subsample = model.emission_loglik(values, use_mlp)
    log_trans = model.log_trans()
    arc_logprob = log_trans[graph.node_pdf[graph.arc_src], graph.arc_kind]
    result = viterbi_decode(graph, emissions, arc_logprob, beam)
    result.subsample = subsample
    return result
