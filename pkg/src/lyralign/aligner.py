"""Word-level forced alignment and the alignment TSV format.

viterbi_align decodes a compiled graph and converts the state path into word
spans: a word starts at the first frame spent in its first state and ends
after the last frame of its last state, so word, silence and filler segments
tile the utterance exactly. Times are multiples of the effective frame shift
(10 ms for GMM decoding, subsample * 10 ms for the hybrid path).

Output format: `#key=value` header lines (utterance id, model hash, option
flags), then `word<TAB>start<TAB>end<TAB>score` rows with 3-decimal seconds.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .am.model import AcousticModel, ModelError
from .am.viterbi import force_align_states
from .graph import build_graph
from .lexicon import SILENCE_PHONE, LyricsLine

WORKERS_ENV = "LYRALIGN_WORKERS"


class AlignmentFileError(ValueError):
    pass


@dataclass(frozen=True)
class WordSpan:
    token: str
    start_sec: float
    end_sec: float
    score: float


@dataclass
class WordAlignment:
    utt_id: str
    words: list
    total_loglik: float
    frame_shift_sec: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        starts = [w.start_sec for w in self.words]
        if any(b < a for a, b in zip(starts, starts[1:])):
            raise ValueError("word starts must be non-decreasing")
        if any(w.end_sec < w.start_sec for w in self.words):
            raise ValueError("word end before start")


def viterbi_align(graph, model: AcousticModel, features, utt_id: str = "",
                  use_mlp: bool | None = None, beam: float | None = None) -> WordAlignment:
    """Globally optimal word boundaries for one utterance."""
    if hasattr(features, "layout"):
        model.check_layout(features.layout)
    if use_mlp is None:
        use_mlp = model.mlp is not None
    result = force_align_states(model, features, graph, use_mlp=use_mlp, beam=beam)
    shift = model.frame_shift_ms / 1000.0 * result.subsample
    word_ids = graph.node_word[result.node_path]
    spans = []
    for w, token in enumerate(graph.words):
        frames = np.flatnonzero(word_ids == w)
        spans.append(WordSpan(token, frames[0] * shift, (frames[-1] + 1) * shift,
                              float(result.frame_scores[frames].sum())))
    return WordAlignment(utt_id, spans, result.score, shift,
                         {"sil": graph.meta.get("sil"), "mus": graph.meta.get("mus")})


def constrained_targets(model: AcousticModel, features, lines, truth_rows,
                        lexicon) -> np.ndarray:
    """Per-frame pdf targets supervised by annotated word boundaries.

    Inside each annotated word span the word's own state chain is Viterbi
    aligned (GMM emissions); the gaps before, between and after words get a
    uniform pass through the 5 silence states. This keeps adaptation
    supervision anchored to the annotation even when free alignment of the
    shifted domain would drift.
    """
    values = features.values if hasattr(features, "values") else np.atleast_2d(features)
    n_frames = values.shape[0]
    shift = model.frame_shift_ms / 1000.0
    words = [w for line in lines for w in line.words]
    if len(words) != len(truth_rows):
        raise ModelError(f"{len(words)} transcript words vs {len(truth_rows)} annotated")
    spans = []
    for token, start, end in truth_rows:
        spans.append((min(int(round(start / shift)), n_frames),
                      min(int(round(end / shift)), n_frames)))
    targets = np.full(n_frames, -1, dtype=np.int64)
    topo = model.topology
    for token, (start, end) in zip(words, spans):
        graph = build_graph([LyricsLine((token,), 0, token)], lexicon, topo, sil=False)
        if end - start < graph.min_path_frames():
            raise ModelError(f"annotated span of {end - start} frames too short for {token!r}")
        result = force_align_states(model, values[start:end], graph, use_mlp=False)
        targets[start:end] = result.pdf_path
    sil = topo.phone_index(SILENCE_PHONE)
    edges = [0] + [frame for span in spans for frame in span] + [n_frames]
    for i in range(0, len(edges), 2):
        gap_start, gap_end = edges[i], edges[i + 1]
        if gap_end > gap_start:
            bounds = np.round(np.linspace(gap_start, gap_end, 6)).astype(int)
            for state in range(5):
                targets[bounds[state]:bounds[state + 1]] = topo.pdf_index(sil, state)
    if (targets < 0).any():
        raise ModelError("annotated spans overlap or are out of order")
    return targets


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if requested is not None:
        return max(1, requested)
    if env:
        return max(1, int(env))
    return 1


def align_corpus(utterances, model: AcousticModel, lexicon, sil: bool = True,
                 mus: bool = False, oov_as_spn: bool = False, beam: float | None = None,
                 parallelism: int | None = None):
    """Align (utt_id, features, lines) triples; failures collected, not fatal.

    Returns (alignments, failures): dicts keyed by utterance id, merged in
    sorted id order so results are identical at any parallelism level.
    """
    utterances = list(utterances)

    def one(item):
        utt_id, features, lines = item
        graph = build_graph(lines, lexicon, model.topology, sil=sil, mus=mus,
                            oov_as_spn=oov_as_spn)
        return viterbi_align(graph, model, features, utt_id, beam=beam)

    workers = worker_count(parallelism)
    alignments: dict[str, WordAlignment] = {}
    failures: dict[str, str] = {}
    if workers == 1:
        results = []
        for item in utterances:
            try:
                results.append((item[0], one(item), None))
            except Exception as exc:
                results.append((item[0], None, f"{type(exc).__name__}: {exc}"))
    else:
        def guarded(item):
            try:
                return item[0], one(item), None
            except Exception as exc:
                return item[0], None, f"{type(exc).__name__}: {exc}"
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, utterances))
    for utt_id, alignment, error in sorted(results, key=lambda r: r[0]):
        if error is None:
            alignments[utt_id] = alignment
        else:
            failures[utt_id] = error
    return alignments, failures


def format_alignment(alignment: WordAlignment) -> str:
    lines = [f"#utt_id={alignment.utt_id}"]
    for key in sorted(alignment.meta):
        lines.append(f"#{key}={alignment.meta[key]}")
    lines.append(f"#frame_shift_sec={alignment.frame_shift_sec:.3f}")
    lines.append(f"#total_loglik={alignment.total_loglik:.3f}")
    for w in alignment.words:
        lines.append(f"{w.token}\t{w.start_sec:.3f}\t{w.end_sec:.3f}\t{w.score:.3f}")
    return "\n".join(lines) + "\n"


def parse_alignment(text: str) -> WordAlignment:
    meta = {}
    words = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].partition("=")
            meta[key] = value
            continue
        fields = raw.split("\t")
        if len(fields) != 4:
            raise AlignmentFileError(f"line {lineno}: expected 4 tab-separated fields")
        words.append(WordSpan(fields[0], float(fields[1]), float(fields[2]), float(fields[3])))
    if "utt_id" not in meta:
        raise AlignmentFileError("missing #utt_id header")
    return WordAlignment(meta.pop("utt_id"), words,
                         float(meta.pop("total_loglik", "nan")),
                         float(meta.pop("frame_shift_sec", "nan")), meta)


def write_alignment(path, alignment: WordAlignment) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_alignment(alignment))


def read_alignment(path) -> WordAlignment:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_alignment(fh.read())
