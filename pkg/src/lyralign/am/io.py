"""Versioned, checksummed text model format LYAM1.

    LYAM1
    checksum <sha256 of everything after this line>
    meta <key> <value>
    layout <group=dim,...>
    frame_shift_ms <x>
    phones <p1> <p2> ...
    trans <pdf> <self> <next> <skip>
    gmm <pdf> <ncomp> <dim>
    w <weights...>
    m <comp> <mean...>
    v <comp> <variances...>
    mlp 0|1
    [mlp_head / mlp_sizes / priors / W / b records]
    end

All reals carry 17 significant digits, so save -> load is bit-exact on every
parameter.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..features.fileio import format_layout, parse_layout
from .mlp import MlpModel
from .model import AcousticModel, GmmState, HmmTopology, ModelError

_MAGIC = "LYAM1"


class ModelFormatError(ModelError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ModelVersionError(ModelError):
    pass


class ModelChecksumError(ModelError):
    pass


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.atleast_1d(values))


def dumps_model(model: AcousticModel) -> str:
    lines = []
    for key in model.meta:
        lines.append(f"meta {key} {model.meta[key]}")
    lines.append(f"layout {format_layout(model.layout)}")
    lines.append(f"frame_shift_ms {model.frame_shift_ms:.17g}")
    lines.append("phones " + " ".join(model.topology.phones))
    for pdf in range(model.n_pdfs):
        lines.append(f"trans {pdf} {_fmt(model.trans[pdf])}")
    for pdf, gmm in enumerate(model.gmms):
        lines.append(f"gmm {pdf} {gmm.n_components} {gmm.dim}")
        lines.append("w " + _fmt(gmm.weights))
        for m in range(gmm.n_components):
            lines.append(f"m {m} " + _fmt(gmm.means[m]))
            lines.append(f"v {m} " + _fmt(gmm.variances[m]))
    if model.mlp is None:
        lines.append("mlp 0")
    else:
        mlp = model.mlp
        lines.append("mlp 1")
        lines.append(f"mlp_head {mlp.splice_context} {mlp.subsample} "
                     f"{mlp.base_lr:.17g} {mlp.batch_size} {mlp.seed}")
        lines.append("mlp_sizes " + " ".join(str(s) for s in mlp.sizes))
        lines.append("priors " + _fmt(mlp.log_priors))
        for layer, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            for row in range(w.shape[0]):
                lines.append(f"W {layer} {row} " + _fmt(w[row]))
            lines.append(f"b {layer} " + _fmt(b))
    lines.append("end")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{_MAGIC}\nchecksum {digest}\n" + body


def model_sha256(model: AcousticModel) -> str:
    return hashlib.sha256(dumps_model(model).encode("utf-8")).hexdigest()


class _Reader:
    def __init__(self, lines, start):
        self.lines = lines
        self.pos = start

    def next(self, expect=None):
        if self.pos >= len(self.lines):
            raise ModelFormatError(self.pos + 1, "truncated file")
        lineno = self.pos + 1
        fields = self.lines[self.pos].split()
        self.pos += 1
        if expect is not None and (not fields or fields[0] != expect):
            raise ModelFormatError(lineno, f"expected {expect!r} record")
        return lineno, fields

    def peek(self):
        return self.lines[self.pos].split()[0] if self.pos < len(self.lines) else None


def loads_model(text: str) -> AcousticModel:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ModelVersionError(f"bad magic {lines[0][:16]!r}" if lines else "empty file")
    if len(lines) < 2 or not lines[1].startswith("checksum "):
        raise ModelFormatError(2, "missing checksum line")
    stated = lines[1].split()[1]
    body_offset = len(lines[0]) + 1 + len(lines[1]) + 1
    actual = hashlib.sha256(text[body_offset:].encode("utf-8")).hexdigest()
    if actual != stated:
        raise ModelChecksumError(f"checksum mismatch: {actual[:12]} != {stated[:12]}")

    reader = _Reader(lines, 2)
    meta = {}
    while reader.peek() == "meta":
        lineno, fields = reader.next("meta")
        if len(fields) < 3:
            raise ModelFormatError(lineno, "meta needs key and value")
        meta[fields[1]] = " ".join(fields[2:])
    lineno, fields = reader.next("layout")
    try:
        layout = parse_layout(fields[1])
    except Exception as exc:
        raise ModelFormatError(lineno, str(exc)) from None
    _, fields = reader.next("frame_shift_ms")
    frame_shift_ms = float(fields[1])
    _, fields = reader.next("phones")
    topology = HmmTopology(tuple(fields[1:]))

    trans = np.zeros((topology.n_pdfs, 3))
    for _ in range(topology.n_pdfs):
        lineno, fields = reader.next("trans")
        if len(fields) != 5:
            raise ModelFormatError(lineno, "trans needs pdf and 3 probabilities")
        trans[int(fields[1])] = [float(v) for v in fields[2:]]

    gmms = []
    for pdf in range(topology.n_pdfs):
        lineno, fields = reader.next("gmm")
        if int(fields[1]) != pdf:
            raise ModelFormatError(lineno, f"gmm record out of order (got {fields[1]})")
        ncomp, dim = int(fields[2]), int(fields[3])
        lineno, fields = reader.next("w")
        weights = np.array([float(v) for v in fields[1:]])
        if weights.size != ncomp:
            raise ModelFormatError(lineno, f"expected {ncomp} weights")
        means = np.zeros((ncomp, dim))
        variances = np.zeros((ncomp, dim))
        for m in range(ncomp):
            lineno, fields = reader.next("m")
            if len(fields) != dim + 2:
                raise ModelFormatError(lineno, f"mean row needs {dim} values")
            means[m] = [float(v) for v in fields[2:]]
            lineno, fields = reader.next("v")
            if len(fields) != dim + 2:
                raise ModelFormatError(lineno, f"variance row needs {dim} values")
            variances[m] = [float(v) for v in fields[2:]]
        try:
            gmms.append(GmmState(weights, means, variances))
        except ModelError as exc:
            raise ModelFormatError(lineno, str(exc)) from None

    lineno, fields = reader.next("mlp")
    mlp = None
    if fields[1] == "1":
        _, fields = reader.next("mlp_head")
        splice_context, subsample = int(fields[1]), int(fields[2])
        base_lr, batch_size, seed = float(fields[3]), int(fields[4]), int(fields[5])
        _, fields = reader.next("mlp_sizes")
        sizes = [int(s) for s in fields[1:]]
        lineno, fields = reader.next("priors")
        log_priors = np.array([float(v) for v in fields[1:]])
        if log_priors.size != sizes[-1]:
            raise ModelFormatError(lineno, "prior count does not match output size")
        weights = [np.zeros((sizes[i + 1], sizes[i])) for i in range(len(sizes) - 1)]
        biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        for layer in range(len(weights)):
            for row in range(weights[layer].shape[0]):
                lineno, fields = reader.next("W")
                if int(fields[1]) != layer or int(fields[2]) != row:
                    raise ModelFormatError(lineno, "weight row out of order")
                if len(fields) != weights[layer].shape[1] + 3:
                    raise ModelFormatError(lineno, "weight row has wrong width")
                weights[layer][row] = [float(v) for v in fields[3:]]
            lineno, fields = reader.next("b")
            biases[layer] = np.array([float(v) for v in fields[2:]])
            if biases[layer].size != weights[layer].shape[0]:
                raise ModelFormatError(lineno, "bias size mismatch")
        mlp = MlpModel(weights, biases, log_priors, splice_context, subsample,
                       base_lr, batch_size, seed)
    elif fields[1] != "0":
        raise ModelFormatError(lineno, f"mlp flag must be 0 or 1, got {fields[1]}")
    reader.next("end")
    return AcousticModel(topology, layout, gmms, trans, mlp, frame_shift_ms, meta)


def save_model(path, model: AcousticModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> AcousticModel:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())
