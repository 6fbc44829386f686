"""Compile lyrics into HMM decoding graphs.

Words appear in order, each as parallel branches over its pronunciation
variants (lexicon order). Optional silence can sit between words; optional
silence and instrumental filler (MUS) sit at line boundaries including the
utterance edges, all skippable. Every complete path spells the full word
sequence exactly once.

The MUS filler enforces a minimum duration of MUS_MIN_FRAMES by tiling its
5 emitting states without skip arcs until the chain is that long; self-loops
let it stretch over arbitrarily long interludes. When the model was never
trained with MUS observations its states simply share the silence
statistics, which the training stage arranges.
"""

from __future__ import annotations

from lyralign.am.model import ARC_NEXT, ARC_SELF, ARC_SKIP, HmmTopology
from lyralign.am.viterbi import KIND_MUS, KIND_SIL, KIND_WORD, DecodeGraph
from lyralign.lexicon import (
    MUSIC_PHONE,
    NOISE_PHONE,
    SILENCE_PHONE,
    Lexicon,
    LyricsLine,
    OovError,
    oov_report,
)

MUS_MIN_FRAMES = 30


class GraphError(ValueError):
    pass


class _Builder:
    def __init__(self, topology: HmmTopology):
        self.topology = topology
        self.pdf, self.phone, self.state, self.word, self.kind = [], [], [], [], []
        self.arc_src, self.arc_dst, self.arc_kind = [], [], []
        self.start_nodes: list[int] = []
        self.frontier: list[int] = []
        self.at_start = True

    def _add_node(self, phone_idx: int, state: int, word_idx: int, kind: int) -> int:
        node = len(self.pdf)
        self.pdf.append(self.topology.pdf_index(phone_idx, state))
        self.phone.append(phone_idx)
        self.state.append(state)
        self.word.append(word_idx)
        self.kind.append(kind)
        self.arc_src.append(node)
        self.arc_dst.append(node)
        self.arc_kind.append(ARC_SELF)
        return node

    def _phone_chain(self, phone: str, word_idx: int, kind: int,
                     with_skips: bool = True) -> tuple[int, int]:
        p = self.topology.phone_index(phone)
        ids = []
        for s in range(self.topology.n_states(phone)):
            node = self._add_node(p, s, word_idx, kind)
            ids.append(node)
            if s > 0:
                self.arc_src.append(ids[s - 1])
                self.arc_dst.append(node)
                self.arc_kind.append(ARC_NEXT)
            if with_skips and s >= 2 and self.topology.has_skip(phone, s - 2):
                self.arc_src.append(ids[s - 2])
                self.arc_dst.append(node)
                self.arc_kind.append(ARC_SKIP)
        return ids[0], ids[-1]

    def _connect(self, entries: list[int]) -> None:
        for exit_node in self.frontier:
            for entry in entries:
                self.arc_src.append(exit_node)
                self.arc_dst.append(entry)
                self.arc_kind.append(ARC_NEXT)
        if self.at_start:
            self.start_nodes.extend(entries)

    def add_word(self, prons, word_idx: int) -> None:
        entries, exits = [], []
        for pron in prons:
            first = last = None
            for phone in pron:
                entry, exit_node = self._phone_chain(phone, word_idx, KIND_WORD)
                if first is None:
                    first = entry
                else:
                    self.arc_src.append(prev_exit)
                    self.arc_dst.append(entry)
                    self.arc_kind.append(ARC_NEXT)
                prev_exit = exit_node
                last = exit_node
            entries.append(first)
            exits.append(last)
        self._connect(entries)
        self.frontier = exits
        self.at_start = False

    def add_optional_silence(self) -> None:
        entry, exit_node = self._phone_chain(SILENCE_PHONE, -1, KIND_SIL)
        self._connect([entry])
        self.frontier = self.frontier + [exit_node]

    def add_optional_music(self) -> None:
        p = self.topology.phone_index(MUSIC_PHONE)
        n_states = self.topology.n_states(MUSIC_PHONE)
        ids = []
        for i in range(MUS_MIN_FRAMES):
            node = self._add_node(p, i % n_states, -1, KIND_MUS)
            ids.append(node)
            if i > 0:
                self.arc_src.append(ids[i - 1])
                self.arc_dst.append(node)
                self.arc_kind.append(ARC_NEXT)
        self._connect([ids[0]])
        self.frontier = self.frontier + [ids[-1]]

    def build(self, words, word_lines) -> DecodeGraph:
        if not self.frontier:
            raise GraphError("empty graph")
        return DecodeGraph(
            node_pdf=self.pdf, node_phone=self.phone, node_state=self.state,
            node_word=self.word, node_kind=self.kind,
            arc_src=self.arc_src, arc_dst=self.arc_dst, arc_kind=self.arc_kind,
            start_nodes=self.start_nodes, final_nodes=self.frontier,
            words=tuple(words), word_lines=tuple(word_lines),
        )


def build_graph(lines: list[LyricsLine], lexicon: Lexicon, topology: HmmTopology,
                sil: bool = True, mus: bool = False, oov_as_spn: bool = False) -> DecodeGraph:
    """Compile normalized lyric lines into a decode graph.

    Raises OovError when out-of-vocabulary words are present, unless
    oov_as_spn maps them to the spoken-noise phone.
    """
    if not lines or not any(line.words for line in lines):
        raise GraphError("empty lyrics")
    oov = oov_report(lexicon, lines)
    if oov and not oov_as_spn:
        raise OovError(oov)

    builder = _Builder(topology)
    words: list[str] = []
    word_lines: list[int] = []

    def boundary_fillers():
        if sil:
            builder.add_optional_silence()
        if mus:
            builder.add_optional_music()

    boundary_fillers()
    for line in lines:
        for j, token in enumerate(line.words):
            if j > 0 and sil:
                builder.add_optional_silence()
            prons = lexicon.entries.get(token, [(NOISE_PHONE,)])
            builder.add_word(prons, len(words))
            words.append(token)
            word_lines.append(line.line_index)
        boundary_fillers()
    graph = builder.build(words, word_lines)
    graph.meta["sil"] = sil
    graph.meta["mus"] = mus
    return graph


def linear_state_sequence(words, lexicon: Lexicon, topology: HmmTopology) -> list[int]:
    """Pdf sequence of the first-pronunciation linear path (no fillers)."""
    pdfs = []
    for token in words:
        if token not in lexicon:
            raise OovError([token])
        pron = lexicon.entries[token][0]
        for phone in pron:
            p = topology.phone_index(phone)
            for s in range(topology.n_states(phone)):
                pdfs.append(topology.pdf_index(p, s))
    return pdfs
