"""Brute-force oracles independent of the production decoders."""

from collections import defaultdict

import numpy as np

from lyralign.am.viterbi import DecodeGraph


def enumerate_best_path(graph: DecodeGraph, emissions: np.ndarray, arc_logprob: np.ndarray):
    """Exhaustive Viterbi oracle: try every admissible path.

    Accumulation order matches the decoder exactly ((acc + arc) + emission),
    so scores are comparable with float equality. Ties resolve to the path
    whose reversed state sequence is lexicographically largest, i.e. the one
    taking each forward transition earliest.
    """
    n_frames = emissions.shape[0]
    node_emis = emissions[:, graph.node_pdf]
    adjacency = defaultdict(list)
    for src, dst, lp in zip(graph.arc_src, graph.arc_dst, arc_logprob):
        adjacency[int(src)].append((int(dst), float(lp)))
    finals = set(int(f) for f in graph.final_nodes)
    best = {"score": -np.inf, "key": None, "path": None}

    def recurse(t, node, acc, path):
        if t == n_frames - 1:
            if node in finals:
                key = tuple(reversed(path))
                if acc > best["score"] or (acc == best["score"] and key > best["key"]):
                    best["score"], best["key"], best["path"] = acc, key, list(path)
            return
        for dst, lp in adjacency[node]:
            recurse(t + 1, dst, (acc + lp) + node_emis[t + 1, dst], path + [dst])

    for start in graph.start_nodes:
        recurse(0, int(start), node_emis[0, int(start)], [int(start)])
    return best["path"], best["score"]


def random_chain_graph(rng, max_states=6):
    """Left-to-right chain with random skips and entry/exit variants."""
    n = int(rng.integers(2, max_states + 1))
    src, dst, kind = [], [], []
    for i in range(n):
        src.append(i)
        dst.append(i)
        kind.append(0)
        if i + 1 < n:
            src.append(i)
            dst.append(i + 1)
            kind.append(1)
        if i + 2 < n and rng.random() < 0.4:
            src.append(i)
            dst.append(i + 2)
            kind.append(2)
    starts = [0] + ([1] if n > 2 and rng.random() < 0.4 else [])
    finals = [n - 1] + ([n - 2] if n > 2 and rng.random() < 0.4 else [])
    return DecodeGraph(
        node_pdf=np.arange(n), node_phone=np.zeros(n, dtype=int),
        node_state=np.arange(n), node_word=np.full(n, -1), node_kind=np.zeros(n, dtype=int),
        arc_src=src, arc_dst=dst, arc_kind=kind,
        start_nodes=starts, final_nodes=finals,
    )
