"""Flat-start initialization, Viterbi-EM training, and GMM MAP adaptation.

Training is segmental: the E-step hard-aligns every utterance to its
transcript graph with exact Viterbi, the M-step re-estimates mixture
parameters from the assigned frames (soft component responsibilities within
each state) and transition probabilities from arc counts. The reported
per-iteration log likelihood is the summed Viterbi path score under the
parameters entering that iteration; it is non-decreasing up to the variance
and transition floors.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..graph import build_graph, linear_state_sequence
from ..lexicon import Lexicon
from .model import TRANS_FLOOR, VAR_FLOOR, AcousticModel, GmmState, HmmTopology, ModelError
from .viterbi import force_align_states

_SPLIT_OFFSET = 0.2  # split perturbation in units of the dimension's std dev


def _values(mat):
    return mat.values if hasattr(mat, "values") else np.atleast_2d(np.asarray(mat, dtype=np.float64))


def _layout(mat, dim):
    return mat.layout if hasattr(mat, "layout") else (("RAW", dim),)


def flat_start(features, transcripts, lexicon: Lexicon,
               topology: HmmTopology | None = None) -> AcousticModel:
    """Single-Gaussian model: global mean/variance everywhere, uniform arcs.

    A uniform segmentation of each utterance over its linear state sequence
    (first pronunciations, no fillers) provides the initial state occupancy
    counts, recorded in model.meta.
    """
    if not features:
        raise ModelError("no training utterances")
    if topology is None:
        topology = HmmTopology.from_phone_set(lexicon.phone_set)
    mats = [_values(f) for f in features]
    dim = mats[0].shape[1]
    occupancy = np.zeros(topology.n_pdfs)
    for mat, transcript in zip(mats, transcripts):
        words = [w for line in transcript for w in line.words]
        pdfs = linear_state_sequence(words, lexicon, topology)
        n_frames, n_states = mat.shape[0], len(pdfs)
        if n_frames < n_states:
            raise ModelError(
                f"utterance of {n_frames} frames shorter than its {n_states}-state minimum path")
        bounds = np.round(np.arange(n_states + 1) * n_frames / n_states).astype(int)
        for i, pdf in enumerate(pdfs):
            occupancy[pdf] += bounds[i + 1] - bounds[i]
    stacked = np.concatenate(mats, axis=0)
    mean = stacked.mean(axis=0)
    var = np.maximum(stacked.var(axis=0), VAR_FLOOR)
    gmms = [GmmState(np.array([1.0]), mean[None, :].copy(), var[None, :].copy())
            for _ in range(topology.n_pdfs)]
    model = AcousticModel(topology, _layout(features[0], dim), gmms,
                          topology.uniform_transitions())
    model.meta["flat_occupancy"] = occupancy.tolist()
    # all emissions tie on a flat model, so the first EM iteration must use
    # the uniform segmentation rather than Viterbi (which would squeeze every
    # state to one frame under the tie-break rule)
    model.meta["flat_start"] = "1"
    return model


def _equal_alignment(mat, transcript, lexicon: Lexicon, topology: HmmTopology):
    """Uniform-segmentation state path over the linear transcript sequence."""
    words = [w for line in transcript for w in line.words]
    pdfs = linear_state_sequence(words, lexicon, topology)
    n_frames, n_states = mat.shape[0], len(pdfs)
    if n_frames < n_states:
        raise ModelError(
            f"utterance of {n_frames} frames shorter than its {n_states}-state minimum path")
    bounds = np.round(np.arange(n_states + 1) * n_frames / n_states).astype(int)
    pdf_path = np.empty(n_frames, dtype=np.int64)
    seg_path = np.empty(n_frames, dtype=np.int64)
    for i, pdf in enumerate(pdfs):
        pdf_path[bounds[i]:bounds[i + 1]] = pdf
        seg_path[bounds[i]:bounds[i + 1]] = i
    kinds = np.where(seg_path[1:] == seg_path[:-1], 0, 1)
    return pdf_path, pdf_path[:-1], kinds


def _path_score(model: AcousticModel, mat, pdf_path, src_pdfs, kinds) -> float:
    emis = 0.0
    for pdf in np.unique(pdf_path):
        emis += model.gmms[pdf].loglik(mat[pdf_path == pdf]).sum()
    log_trans = model.log_trans()
    return float(emis + log_trans[src_pdfs, kinds].sum())


def _copy_gmms(gmms):
    return [GmmState(g.weights.copy(), g.means.copy(), g.variances.copy()) for g in gmms]


def split_components(model: AcousticModel, max_components: int) -> AcousticModel:
    """Mix up: split each state's largest-weight Gaussian along its widest dim."""
    gmms = []
    for g in model.gmms:
        if g.n_components >= max_components:
            gmms.append(GmmState(g.weights.copy(), g.means.copy(), g.variances.copy()))
            continue
        j = int(np.argmax(g.weights))
        d = int(np.argmax(g.variances[j]))
        offset = _SPLIT_OFFSET * np.sqrt(g.variances[j, d])
        lo = g.means[j].copy()
        hi = g.means[j].copy()
        lo[d] -= offset
        hi[d] += offset
        weights = np.concatenate([g.weights, [g.weights[j] / 2.0]])
        weights[j] /= 2.0
        means = np.vstack([g.means, hi[None, :]])
        means[j] = lo
        variances = np.vstack([g.variances, g.variances[j][None, :]])
        gmms.append(GmmState(weights, means, variances))
    return replace(model, gmms=gmms, trans=model.trans.copy(), meta=dict(model.meta))


def em_train(model: AcousticModel, features, transcripts, lexicon: Lexicon,
             iterations: int, mixup_schedule=(), max_components: int = 4,
             sil: bool = False, mus: bool = False):
    """Viterbi-EM; returns (model, per-iteration log likelihood, event records).

    Utterances are accumulated in list order so reruns are bit-identical.
    Component mix-up runs after the M-step of each iteration listed in
    mixup_schedule.
    """
    model = replace(model, gmms=_copy_gmms(model.gmms), trans=model.trans.copy(),
                    meta=dict(model.meta))
    flat_boot = bool(model.meta.pop("flat_start", False))
    mats = [_values(f) for f in features]
    graphs = [build_graph(t, lexicon, model.topology, sil=sil, mus=mus) for t in transcripts]
    logliks: list[float] = []
    events: list[dict] = []
    for iteration in range(iterations):
        n_pdfs = model.n_pdfs
        gamma = [None] * n_pdfs
        gamma_x = [None] * n_pdfs
        gamma_xx = [None] * n_pdfs
        trans_counts = np.zeros((n_pdfs, 3))
        total = 0.0
        for u, (mat, graph) in enumerate(zip(mats, graphs)):
            if iteration == 0 and flat_boot:
                pdf_path, src_pdfs, kinds = _equal_alignment(
                    mat, transcripts[u], lexicon, model.topology)
                total += _path_score(model, mat, pdf_path, src_pdfs, kinds)
            else:
                result = force_align_states(model, mat, graph, use_mlp=False)
                total += result.score
                pdf_path = result.pdf_path
                src_pdfs = graph.node_pdf[graph.arc_src[result.arc_path]]
                kinds = graph.arc_kind[result.arc_path]
            for pdf in np.unique(pdf_path):
                frames = mat[pdf_path == pdf]
                resp = model.gmms[pdf].responsibilities(frames)
                g = resp.sum(axis=1)
                gx = resp @ frames
                gxx = resp @ frames ** 2
                if gamma[pdf] is None:
                    gamma[pdf], gamma_x[pdf], gamma_xx[pdf] = g, gx, gxx
                else:
                    gamma[pdf] += g
                    gamma_x[pdf] += gx
                    gamma_xx[pdf] += gxx
            np.add.at(trans_counts, (src_pdfs, kinds), 1)
        logliks.append(total)

        empty = []
        gmms = []
        for pdf in range(n_pdfs):
            old = model.gmms[pdf]
            if gamma[pdf] is None or gamma[pdf].sum() < 1e-8:
                empty.append(pdf)
                gmms.append(GmmState(old.weights.copy(), old.means.copy(), old.variances.copy()))
                continue
            g, gx, gxx = gamma[pdf], gamma_x[pdf], gamma_xx[pdf]
            weights = np.maximum(g / g.sum(), 1e-8)
            weights = weights / weights.sum()
            means = old.means.copy()
            variances = old.variances.copy()
            for m in range(old.n_components):
                if g[m] < 1e-8:
                    continue
                means[m] = gx[m] / g[m]
                variances[m] = np.maximum(gxx[m] / g[m] - means[m] ** 2, VAR_FLOOR)
            gmms.append(GmmState(weights, means, variances))
        if empty:
            events.append({"iteration": iteration, "empty_states": empty})

        mask = model.topology.arc_mask()
        trans = model.trans.copy()
        for pdf in range(n_pdfs):
            row_total = trans_counts[pdf].sum()
            if row_total == 0:
                continue
            row = trans_counts[pdf] / row_total
            row = np.where(mask[pdf], np.maximum(row, TRANS_FLOOR), 0.0)
            trans[pdf] = row / row.sum()
        model = replace(model, gmms=gmms, trans=trans, meta=dict(model.meta))

        if iteration in set(mixup_schedule):
            model = split_components(model, max_components)
            events.append({"iteration": iteration, "mixup": True})
    return model, logliks, events


def map_adapt_gmm(model: AcousticModel, features, pdf_paths, tau: float = 10.0) -> AcousticModel:
    """MAP mean interpolation toward in-domain statistics.

    mu' = (tau * mu + sum gamma x) / (tau + sum gamma), per component;
    weights and variances stay fixed.
    """
    if tau <= 0:
        raise ModelError(f"tau must be positive, got {tau}")
    n_pdfs = model.n_pdfs
    gamma = [None] * n_pdfs
    gamma_x = [None] * n_pdfs
    for mat, path in zip(features, pdf_paths):
        values = _values(mat)
        path = np.asarray(path)
        for pdf in np.unique(path):
            frames = values[path == pdf]
            resp = model.gmms[pdf].responsibilities(frames)
            g = resp.sum(axis=1)
            gx = resp @ frames
            if gamma[pdf] is None:
                gamma[pdf], gamma_x[pdf] = g, gx
            else:
                gamma[pdf] += g
                gamma_x[pdf] += gx
    gmms = []
    for pdf in range(n_pdfs):
        old = model.gmms[pdf]
        means = old.means.copy()
        if gamma[pdf] is not None:
            for m in range(old.n_components):
                denom = tau + gamma[pdf][m]
                means[m] = (tau * old.means[m] + gamma_x[pdf][m]) / denom
        gmms.append(GmmState(old.weights.copy(), means, old.variances.copy()))
    return replace(model, gmms=gmms, trans=model.trans.copy(), meta=dict(model.meta))
