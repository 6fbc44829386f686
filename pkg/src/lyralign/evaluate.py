"""Word-boundary error metrics, histograms, and report comparison.

A word's error is the absolute deviation of its predicted start time from
the annotated start. Reports carry mean, median, population standard
deviation, and the percentage of starts within a tolerance (default 250 ms).
End-time errors are computed as well but reported separately, since the
headline metrics are defined on starts only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lexicon import normalize_token

DEFAULT_TOLERANCE_SEC = 0.25
DEFAULT_HISTOGRAM_EDGES = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0)


class EvalError(ValueError):
    pass


class WordMismatchError(EvalError):
    def __init__(self, index, predicted, truth):
        self.index = index
        super().__init__(
            f"word sequences diverge at index {index}: predicted {predicted!r}, truth {truth!r}")


def parse_truth(text: str) -> list:
    """`word<TAB>start_sec<TAB>end_sec` rows; `#` comments allowed."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 3:
            raise EvalError(f"line {lineno}: expected word, start, end")
        rows.append((fields[0], float(fields[1]), float(fields[2])))
    return rows


def read_truth(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_truth(fh.read())


def pair_words(predicted, truth) -> list[dict]:
    """Per-word start/end errors; the word sequences must match exactly.

    predicted: WordAlignment (or any object with .words of WordSpan);
    truth: (word, start_sec, end_sec) rows.
    """
    spans = predicted.words if hasattr(predicted, "words") else list(predicted)
    if len(spans) != len(truth):
        index = min(len(spans), len(truth))
        pred_tok = spans[index].token if index < len(spans) else None
        true_tok = truth[index][0] if index < len(truth) else None
        raise WordMismatchError(index, pred_tok, true_tok)
    records = []
    for i, (span, (token, start, end)) in enumerate(zip(spans, truth)):
        if normalize_token(span.token) != normalize_token(token):
            raise WordMismatchError(i, span.token, token)
        records.append({
            "token": span.token,
            "pred_start": span.start_sec,
            "true_start": start,
            "error": abs(span.start_sec - start),
            "end_error": abs(span.end_sec - end),
        })
    return records


@dataclass
class EvalReport:
    n_words: int
    mean_ae_sec: float
    median_ae_sec: float
    std_ae_sec: float
    pct_correct: float
    tolerance_sec: float
    per_word: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "n_words": self.n_words,
            "mean_ae_sec": self.mean_ae_sec,
            "median_ae_sec": self.median_ae_sec,
            "std_ae_sec": self.std_ae_sec,
            "pct_correct": self.pct_correct,
            "tolerance_sec": self.tolerance_sec,
            "per_word": self.per_word,
            "extras": self.extras,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        return cls(data["n_words"], data["mean_ae_sec"], data["median_ae_sec"],
                   data["std_ae_sec"], data["pct_correct"], data["tolerance_sec"],
                   data.get("per_word", []), data.get("extras", {}))


def _errors(records) -> np.ndarray:
    if not records:
        raise EvalError("no word errors to aggregate")
    if isinstance(records[0], dict):
        return np.array([r["error"] for r in records])
    return np.asarray(records, dtype=np.float64)


def aggregate(records, tolerance_sec: float = DEFAULT_TOLERANCE_SEC) -> EvalReport:
    """Corpus statistics over per-word records (population std deviation)."""
    errors = _errors(records)
    per_word = list(records) if records and isinstance(records[0], dict) else [
        {"token": "", "pred_start": None, "true_start": None,
         "error": float(e), "end_error": None} for e in errors]
    extras = {}
    end_errors = [r.get("end_error") for r in per_word]
    if all(e is not None for e in end_errors):
        extras["end_time"] = {
            "mean_ae_sec": float(np.mean(end_errors)),
            "median_ae_sec": float(np.median(end_errors)),
        }
    return EvalReport(
        n_words=int(errors.size),
        mean_ae_sec=float(errors.mean()),
        median_ae_sec=float(np.median(errors)),
        std_ae_sec=float(errors.std()),
        pct_correct=float(100.0 * np.mean(errors <= tolerance_sec)),
        tolerance_sec=float(tolerance_sec),
        per_word=per_word,
        extras=extras,
    )


def histogram(records, bin_edges=DEFAULT_HISTOGRAM_EDGES):
    """Counts per [edge_i, edge_i+1) bin plus a final overflow bin.

    Returns (counts, csv_text); csv rows are `bin_lo,bin_hi,count` with `inf`
    as the last upper edge. Counts always sum to the number of errors.
    """
    edges = list(bin_edges)
    if len(edges) < 2:
        raise EvalError("need at least two bin edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise EvalError("bin edges must be strictly increasing")
    errors = _errors(records)
    counts = np.zeros(len(edges), dtype=int)
    for e in errors:
        if e >= edges[-1]:
            counts[-1] += 1
        else:
            k = int(np.searchsorted(edges, e, side="right")) - 1
            counts[max(k, 0)] += 1
    bounds = list(zip(edges, edges[1:] + [math.inf]))
    csv = "bin_lo,bin_hi,count\n" + "\n".join(
        f"{lo:g},{hi:g},{c}" for (lo, hi), c in zip(bounds, counts)) + "\n"
    return counts, csv


def compare_reports(a: EvalReport, b: EvalReport) -> dict:
    """Per-metric deltas b - a with relative change in percent."""
    if a.n_words != b.n_words:
        raise EvalError(f"reports cover different word counts: {a.n_words} vs {b.n_words}")
    table = {}
    for metric in ("mean_ae_sec", "median_ae_sec", "std_ae_sec", "pct_correct"):
        va, vb = getattr(a, metric), getattr(b, metric)
        table[metric] = {
            "a": va,
            "b": vb,
            "delta": vb - va,
            "relative_pct": 100.0 * (vb - va) / va if va != 0 else math.inf * np.sign(vb - va)
            if vb != va else 0.0,
        }
    return table


def format_compare_table(table: dict) -> str:
    lines = [f"{'metric':<16}{'a':>10}{'b':>10}{'delta':>10}{'rel %':>9}"]
    for metric, row in table.items():
        lines.append(f"{metric:<16}{row['a']:>10.3f}{row['b']:>10.3f}"
                     f"{row['delta']:>10.3f}{row['relative_pct']:>9.1f}")
    return "\n".join(lines)
