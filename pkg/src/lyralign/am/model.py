"""Acoustic model core: HMM topology, diagonal-covariance GMM states, container.

Regular phones get 3 emitting states (left to right, self-loops, no skips);
the special phones SIL/MUS/SPN get 5 states with skip arcs (state s to s+2),
so silence can be traversed in 3 frames. Emission densities are diagonal
GMMs; an optional MLP state classifier provides scaled likelihoods as
log posterior minus log prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lexicon import SPECIAL_PHONES, PhoneSet

VAR_FLOOR = 1e-4
TRANS_FLOOR = 1e-8
EMIT_FLOOR = -1e10

ARC_SELF, ARC_NEXT, ARC_SKIP = 0, 1, 2


class ModelError(ValueError):
    pass


class LayoutMismatchError(ModelError):
    pass


@dataclass(frozen=True)
class HmmTopology:
    """Phone inventory in canonical order (specials first, then sorted)."""

    phones: tuple[str, ...]

    def __post_init__(self):
        offsets = {}
        total = 0
        for i, phone in enumerate(self.phones):
            offsets[i] = total
            total += self.n_states(phone)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_n_pdfs", total)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.phones)})

    @classmethod
    def from_phone_set(cls, phone_set: PhoneSet) -> "HmmTopology":
        regular = sorted(p for p in phone_set.all_phones() if p not in SPECIAL_PHONES)
        return cls(tuple(SPECIAL_PHONES) + tuple(regular))

    def is_special(self, phone: str) -> bool:
        return phone in SPECIAL_PHONES

    def n_states(self, phone: str) -> int:
        return 5 if self.is_special(phone) else 3

    def phone_index(self, phone: str) -> int:
        try:
            return self._index[phone]
        except KeyError:
            raise ModelError(f"phone {phone!r} not in topology") from None

    def pdf_index(self, phone_idx: int, state: int) -> int:
        return self._offsets[phone_idx] + state

    @property
    def n_pdfs(self) -> int:
        return self._n_pdfs

    def pdf_table(self) -> list[tuple[str, int]]:
        return [(p, s) for p in self.phones for s in range(self.n_states(p))]

    def has_skip(self, phone: str, state: int) -> bool:
        return self.is_special(phone) and state + 2 < self.n_states(phone)

    def arc_mask(self) -> np.ndarray:
        """(n_pdfs, 3) boolean: which of self/next/skip exist per state."""
        mask = np.zeros((self.n_pdfs, 3), dtype=bool)
        for phone in self.phones:
            p = self.phone_index(phone)
            for s in range(self.n_states(phone)):
                pdf = self.pdf_index(p, s)
                mask[pdf, ARC_SELF] = True
                mask[pdf, ARC_NEXT] = True  # from the last state this is the exit
                if self.has_skip(phone, s):
                    mask[pdf, ARC_SKIP] = True
        return mask

    def uniform_transitions(self) -> np.ndarray:
        mask = self.arc_mask()
        trans = mask.astype(np.float64)
        return trans / trans.sum(axis=1, keepdims=True)


def _logsumexp(x: np.ndarray, axis: int = 0) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(x - m_safe), axis=axis)) + np.squeeze(m_safe, axis=axis)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


@dataclass
class GmmState:
    """Diagonal-covariance Gaussian mixture over the feature space."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ModelError(f"mixture weights sum to {self.weights.sum()}, not 1")
        if np.any(self.variances < VAR_FLOOR - 1e-12):
            raise ModelError("variance below floor")

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_logliks(self, values: np.ndarray) -> np.ndarray:
        """(n_components, n_frames) log densities including log weights."""
        values = np.atleast_2d(values)
        diff = values[None, :, :] - self.means[:, None, :]
        quad = (diff ** 2 / self.variances[:, None, :]).sum(axis=2)
        const = self.dim * np.log(2 * np.pi) + np.log(self.variances).sum(axis=1)
        ll = -0.5 * (quad + const[:, None])
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return ll + logw[:, None]

    def loglik(self, values: np.ndarray) -> np.ndarray:
        """(n_frames,) mixture log likelihood, floored."""
        return np.maximum(_logsumexp(self.component_logliks(values), axis=0), EMIT_FLOOR)

    def responsibilities(self, values: np.ndarray) -> np.ndarray:
        """(n_components, n_frames) posterior component weights per frame."""
        ll = self.component_logliks(values)
        return np.exp(ll - _logsumexp(ll, axis=0)[None, :])


@dataclass
class AcousticModel:
    """Topology + GMM emissions + transitions + optional MLP classifier."""

    topology: HmmTopology
    layout: tuple[tuple[str, int], ...]
    gmms: list
    trans: np.ndarray
    mlp: "object | None" = None
    frame_shift_ms: float = 10.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layout = tuple((str(g), int(d)) for g, d in self.layout)
        self.trans = np.asarray(self.trans, dtype=np.float64)
        if len(self.gmms) != self.topology.n_pdfs:
            raise ModelError(f"{len(self.gmms)} GMM states for {self.topology.n_pdfs} pdfs")
        if self.trans.shape != (self.topology.n_pdfs, 3):
            raise ModelError(f"transition table shape {self.trans.shape}")

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.layout)

    @property
    def n_pdfs(self) -> int:
        return self.topology.n_pdfs

    def check_layout(self, layout) -> None:
        layout = tuple((str(g), int(d)) for g, d in layout)
        if layout != self.layout:
            raise LayoutMismatchError(f"features {layout} vs model {self.layout}")

    def log_trans(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.trans > 0.0, np.log(np.maximum(self.trans, TRANS_FLOOR)), -np.inf)

    def gmm_loglik(self, values: np.ndarray) -> np.ndarray:
        values = np.atleast_2d(values)
        out = np.empty((values.shape[0], self.n_pdfs))
        for p, gmm in enumerate(self.gmms):
            out[:, p] = gmm.loglik(values)
        return out

    def emission_loglik(self, values, use_mlp: bool = False) -> tuple[np.ndarray, int]:
        """Per-frame state log likelihoods and the decode subsampling factor."""
        if hasattr(values, "values"):
            values = values.values
        if use_mlp:
            if self.mlp is None:
                raise ModelError("model has no MLP section")
            return self.mlp.emission_loglik(values), self.mlp.subsample
        return self.gmm_loglik(values), 1
