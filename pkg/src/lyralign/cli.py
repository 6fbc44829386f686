"""Pipeline CLI: extract, train, adapt, align, score, plot.

Every stage is cached on content hashes (input bytes plus the config subset
that affects it) and embeds those hashes in its artifacts, so re-running a
command with unchanged inputs is a no-op and full pipeline runs are
byte-identical across repeats and worker counts. Exit code is 0 only when
no per-utterance failure occurred.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .aligner import (
    align_corpus,
    constrained_targets,
    format_alignment,
    read_alignment,
    worker_count,
)
from .am.io import load_model, model_sha256, save_model
from .am.mlp import AdaptConfig, adapt_mlp, train_mlp
from .am.train import em_train, flat_start
from .am.viterbi import force_align_states
from .audio import CANONICAL_RATE_HZ, read_wav, resample, speed_perturb
from .config import (
    ALIGN_KEYS,
    FEATURE_KEYS,
    TRAIN_KEYS,
    Manifest,
    PipelineConfig,
    read_config,
    read_manifest,
    sha256_bytes,
    sha256_file,
)
from .evaluate import (
    DEFAULT_HISTOGRAM_EDGES,
    EvalReport,
    aggregate,
    compare_reports,
    format_compare_table,
    histogram,
    pair_words,
    read_truth,
)
from .features.assemble import extract_features
from .features.fileio import read_features, write_features
from .graph import build_graph
from .lexicon import MUSIC_PHONE, SILENCE_PHONE, duration_variants, oov_report, read_dictionary, read_lyrics


def _load_lexicon(cfg: PipelineConfig):
    if not cfg.dictionary:
        raise SystemExit("config must set `dictionary = <path>`")
    lexicon = read_dictionary(cfg.dictionary, cfg.phone_set or None)
    return duration_variants(lexicon, cfg.max_vowel_repeat)


def _canonical_audio(path):
    return resample(read_wav(path), CANONICAL_RATE_HZ)


def _parallel(fn, items, workers):
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _feature_path(workdir, utt_id):
    return os.path.join(workdir, "features", f"{utt_id}.lyf")


def extract_manifest(cfg: PipelineConfig, manifest: Manifest, workdir: str,
                     force: bool = False, workers: int | None = None):
    """Extract (or reuse cached) feature files; returns (statuses, failures)."""
    os.makedirs(os.path.join(workdir, "features"), exist_ok=True)
    cfg_sha = cfg.digest(FEATURE_KEYS)

    def one(row):
        out_path = _feature_path(workdir, row.utt_id)
        try:
            input_sha = sha256_file(row.audio)
            if not force and os.path.exists(out_path):
                cached = read_features(out_path)
                if (cached.meta.get("config_sha256") == cfg_sha
                        and cached.meta.get("input_sha256") == input_sha):
                    return row.utt_id, "skipped", None
            mat = extract_features(_canonical_audio(row.audio), cfg.feature())
            mat.meta = {"utt_id": row.utt_id, "feature_config": cfg.feature_config,
                        "config_sha256": cfg_sha, "input_sha256": input_sha}
            write_features(out_path, mat)
            return row.utt_id, "done", None
        except Exception as exc:
            return row.utt_id, "failed", f"{type(exc).__name__}: {exc}"

    results = sorted(_parallel(one, list(manifest), worker_count(workers)))
    statuses = {utt_id: status for utt_id, status, _ in results}
    failures = {utt_id: err for utt_id, _, err in results if err}
    return statuses, failures


def _load_features(manifest, workdir):
    return {row.utt_id: read_features(_feature_path(workdir, row.utt_id)) for row in manifest}


def _load_lines(manifest):
    return {row.utt_id: read_lyrics(row.lyrics) for row in manifest}


def _check_oov(lexicon, lines_map, oov_as_spn):
    oov = []
    for utt_id in sorted(lines_map):
        for word in oov_report(lexicon, lines_map[utt_id]):
            if word not in oov:
                oov.append(word)
    if oov and not oov_as_spn:
        print("out-of-vocabulary words (fix lyrics/dictionary or set oov_as_spn = true):")
        for word in oov:
            print(f"  {word}")
        raise SystemExit(1)
    return oov


def _train_digest(cfg, manifest, workdir, lexicon_path, gmm_only):
    parts = [cfg.digest(TRAIN_KEYS), str(gmm_only), sha256_file(lexicon_path)]
    for row in sorted(manifest, key=lambda r: r.utt_id):
        parts.append(row.utt_id)
        parts.append(sha256_file(_feature_path(workdir, row.utt_id)))
        parts.append(sha256_file(row.lyrics))
    return sha256_bytes("\n".join(parts).encode())


def _alias_music_to_silence(model):
    """MUS shares silence statistics unless it was trained on its own data."""
    topo = model.topology
    sil = topo.phone_index(SILENCE_PHONE)
    mus = topo.phone_index(MUSIC_PHONE)
    for s in range(topo.n_states(MUSIC_PHONE)):
        src = topo.pdf_index(sil, s)
        dst = topo.pdf_index(mus, s)
        g = model.gmms[src]
        model.gmms[dst] = type(g)(g.weights.copy(), g.means.copy(), g.variances.copy())
        model.trans[dst] = model.trans[src]


def train_model(cfg: PipelineConfig, manifest: Manifest, workdir: str,
                gmm_only: bool = False, force: bool = False):
    """Full training stage; returns (model_path, report_path, skipped)."""
    statuses, failures = extract_manifest(cfg, manifest, workdir)
    if failures:
        for utt_id, err in failures.items():
            print(f"extract {utt_id}: {err}")
        raise SystemExit(1)
    model_path = os.path.join(workdir, "model.lyam")
    report_path = os.path.join(workdir, "train_report.jsonl")
    train_sha = _train_digest(cfg, manifest, workdir, cfg.dictionary, gmm_only)
    if not force and os.path.exists(model_path):
        existing = load_model(model_path)
        if existing.meta.get("train_sha256") == train_sha:
            return model_path, report_path, True

    lexicon = _load_lexicon(cfg)
    lines_map = _load_lines(manifest)
    _check_oov(lexicon, lines_map, cfg.oov_as_spn)
    utt_ids = sorted(lines_map)
    feats_map = _load_features(manifest, workdir)
    feats = [feats_map[u] for u in utt_ids]
    transcripts = [lines_map[u] for u in utt_ids]

    mixup = tuple(i for i in cfg.mixup_iterations if i < cfg.em_iterations)
    model = flat_start(feats, transcripts, lexicon)
    model, logliks, events = em_train(
        model, feats, transcripts, lexicon, cfg.em_iterations,
        mixup_schedule=mixup, max_components=cfg.gaussians_per_state,
        sil=cfg.sil, mus=False)

    report_lines = [json.dumps({"stage": "em", "iteration": i, "loglik": ll})
                    for i, ll in enumerate(logliks)]
    report_lines += [json.dumps({"stage": "em-event", **e}) for e in events]

    if cfg.use_mlp and not gmm_only:
        train_feats = list(feats)
        train_targets = []
        graphs = [build_graph(t, lexicon, model.topology, sil=cfg.sil) for t in transcripts]
        for mat, graph in zip(feats, graphs):
            train_targets.append(force_align_states(model, mat.values, graph).pdf_path)
        for factor in cfg.speed_perturb:
            for u, row in zip(utt_ids, sorted(manifest, key=lambda r: r.utt_id)):
                buf = speed_perturb(_canonical_audio(row.audio), factor)
                mat = extract_features(buf, cfg.feature())
                graph = build_graph(lines_map[u], lexicon, model.topology, sil=cfg.sil)
                train_feats.append(mat)
                train_targets.append(force_align_states(model, mat.values, graph).pdf_path)
        mlp, losses = train_mlp(
            train_feats, train_targets, model.n_pdfs, hidden=cfg.mlp_hidden,
            lr=cfg.learning_rate, epochs=cfg.mlp_epochs, batch_size=cfg.batch_size,
            seed=cfg.seed, splice_context=cfg.splice_context, subsample=cfg.subsample)
        model.mlp = mlp
        report_lines += [json.dumps({"stage": "mlp", "epoch": i, "loss": loss})
                         for i, loss in enumerate(losses)]

    observed = {p for t in transcripts for line in t for w in line.words
                for p in (ph for pron in lexicon.entries.get(w, []) for ph in pron)}
    if MUSIC_PHONE not in observed:
        _alias_music_to_silence(model)

    model.meta["config_sha256"] = cfg.digest()
    model.meta["train_sha256"] = train_sha
    model.meta["feature_config"] = cfg.feature_config
    save_model(model_path, model)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_lines) + "\n")
    return model_path, report_path, False


def _align_manifest(cfg, model, manifest, workdir, lexicon, workers=None, use_features=None):
    feats_map = use_features or _load_features(manifest, workdir)
    lines_map = _load_lines(manifest)
    utterances = [(row.utt_id, feats_map[row.utt_id], lines_map[row.utt_id])
                  for row in sorted(manifest, key=lambda r: r.utt_id)]
    return align_corpus(utterances, model, lexicon, sil=cfg.sil, mus=cfg.mus,
                        oov_as_spn=cfg.oov_as_spn, beam=cfg.beam, parallelism=workers)


def _score_alignments(alignments, manifest, tolerance):
    records = []
    for row in sorted(manifest, key=lambda r: r.utt_id):
        if row.truth is None:
            raise SystemExit(f"manifest row {row.utt_id} has no truth annotation")
        records.extend(pair_words(alignments[row.utt_id], read_truth(row.truth)))
    return aggregate(records, tolerance)


def adapt_grid(cfg: PipelineConfig, model, adapt_feats, adapt_targets,
               dev_items, dev_truths, lexicon):
    """Fine-tune over the LR x epochs grid; returns (cells, best_index).

    dev_items: (utt_id, features, lines) triples; dev_truths: utt_id -> truth
    rows. Each cell reports the dev-set mean alignment error of the adapted
    model; the unadapted model is scored the same way for reference.
    """
    def dev_mean_ae(candidate) -> float:
        alignments, failures = align_corpus(dev_items, candidate, lexicon,
                                            sil=cfg.sil, mus=cfg.mus, beam=cfg.beam)
        if failures:
            raise RuntimeError(f"dev alignment failures: {failures}")
        records = []
        for utt_id, _, _ in dev_items:
            records.extend(pair_words(alignments[utt_id], dev_truths[utt_id]))
        return aggregate(records, cfg.tolerance_sec).mean_ae_sec

    baseline = dev_mean_ae(model)
    cells = []
    for multiplier in cfg.adapt_lr_multipliers:
        for epochs in cfg.adapt_epochs:
            adapt_cfg = AdaptConfig(multiplier, epochs)
            mlp, losses = adapt_mlp(model.mlp, adapt_feats, adapt_targets, adapt_cfg,
                                    seed=cfg.seed + 7919)
            candidate = type(model)(model.topology, model.layout, model.gmms,
                                    model.trans, mlp, model.frame_shift_ms,
                                    dict(model.meta))
            cells.append({
                "label": adapt_cfg.label,
                "lr_multiplier": multiplier,
                "epochs": epochs,
                "dev_mean_ae_sec": dev_mean_ae(candidate),
                "final_loss": losses[-1] if losses else None,
                "model": candidate,
            })
    best = min(range(len(cells)), key=lambda i: cells[i]["dev_mean_ae_sec"])
    return cells, best, baseline


# --------------------------------------------------------------- commands ---

def cmd_extract(args) -> int:
    cfg = read_config(args.config)
    manifest = read_manifest(args.manifest)
    statuses, failures = extract_manifest(cfg, manifest, args.workdir,
                                          force=args.force, workers=args.workers)
    for utt_id in sorted(statuses):
        print(f"extract {utt_id}: {statuses[utt_id]}")
    done = sum(1 for s in statuses.values() if s == "done")
    skipped = sum(1 for s in statuses.values() if s == "skipped")
    print(f"extract: {done} done, {skipped} skipped, {len(failures)} failed "
          f"(dims={cfg.feature().total_dim})")
    return 1 if failures else 0


def cmd_train(args) -> int:
    cfg = read_config(args.config)
    manifest = read_manifest(args.manifest)
    model_path, report_path, skipped = train_model(
        cfg, manifest, args.workdir, gmm_only=args.gmm_only, force=args.force)
    if skipped:
        print(f"train: up to date ({model_path})")
    else:
        print(f"train: wrote {model_path} and {report_path}")
    return 0


def cmd_adapt(args) -> int:
    cfg = read_config(args.config)
    model = load_model(args.model)
    if model.mlp is None:
        raise SystemExit("adaptation needs a model with an MLP section (train without --gmm-only)")
    adapt_manifest = read_manifest(args.manifest)
    dev_manifest = read_manifest(args.dev_manifest)
    for m in (adapt_manifest, dev_manifest):
        _, failures = extract_manifest(cfg, m, args.workdir)
        if failures:
            raise SystemExit(f"extraction failures: {failures}")
    lexicon = _load_lexicon(cfg)

    adapt_rows = {r.utt_id: r for r in adapt_manifest}
    adapt_ids = sorted(adapt_rows)
    if not adapt_ids:
        raise SystemExit("empty adaptation set")
    adapt_feats_map = _load_features(adapt_manifest, args.workdir)
    adapt_lines = _load_lines(adapt_manifest)
    _check_oov(lexicon, adapt_lines, cfg.oov_as_spn)
    adapt_feats, adapt_targets = [], []
    for utt_id in adapt_ids:
        mat = adapt_feats_map[utt_id]
        adapt_feats.append(mat)
        if adapt_rows[utt_id].truth is not None:
            # boundary-annotated in-domain data supervises through its spans
            adapt_targets.append(constrained_targets(
                model, mat, adapt_lines[utt_id],
                read_truth(adapt_rows[utt_id].truth), lexicon))
        else:
            graph = build_graph(adapt_lines[utt_id], lexicon, model.topology,
                                sil=cfg.sil, mus=cfg.mus, oov_as_spn=cfg.oov_as_spn)
            adapt_targets.append(force_align_states(model, mat.values, graph,
                                                    use_mlp=False).pdf_path)

    dev_feats = _load_features(dev_manifest, args.workdir)
    dev_lines = _load_lines(dev_manifest)
    dev_items = [(r.utt_id, dev_feats[r.utt_id], dev_lines[r.utt_id])
                 for r in sorted(dev_manifest, key=lambda r: r.utt_id)]
    dev_truths = {r.utt_id: read_truth(r.truth) for r in dev_manifest}
    cells, best, baseline = adapt_grid(cfg, model, adapt_feats, adapt_targets,
                                       dev_items, dev_truths, lexicon)

    out_dir = os.path.join(args.workdir, "adapted")
    os.makedirs(out_dir, exist_ok=True)
    report = {"unadapted_dev_mean_ae_sec": baseline, "cells": [], "best": cells[best]["label"]}
    print(f"{'cell':<14}{'dev mean AE':>12}")
    print(f"{'(unadapted)':<14}{baseline:>12.3f}")
    for i, cell in enumerate(cells):
        name = f"lr{cell['lr_multiplier']:g}_ep{cell['epochs']}"
        path = os.path.join(out_dir, f"model_{name}.lyam")
        cell["model"].meta["adapt_cell"] = cell["label"]
        save_model(path, cell["model"])
        report["cells"].append({k: cell[k] for k in
                                ("label", "lr_multiplier", "epochs", "dev_mean_ae_sec", "final_loss")}
                               | {"model": path, "best": i == best})
        marker = " *" if i == best else ""
        print(f"{cell['label']:<14}{cell['dev_mean_ae_sec']:>12.3f}{marker}")
    report_path = os.path.join(args.workdir, "adapt_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    print(f"adapt: best cell {report['best']}; wrote {report_path}")
    return 0


def cmd_align(args) -> int:
    cfg = read_config(args.config)
    manifest = read_manifest(args.manifest)
    _, failures = extract_manifest(cfg, manifest, args.workdir, workers=args.workers)
    if failures:
        raise SystemExit(f"extraction failures: {failures}")
    model = load_model(args.model)
    lexicon = _load_lexicon(cfg)
    model_sha = model_sha256(model)
    align_sha = cfg.digest(ALIGN_KEYS)
    out_dir = os.path.join(args.workdir, "align")
    os.makedirs(out_dir, exist_ok=True)

    lines_map = _load_lines(manifest)
    _check_oov(lexicon, lines_map, cfg.oov_as_spn)
    feats_map = _load_features(manifest, args.workdir)
    pending = []
    skipped = 0
    for row in sorted(manifest, key=lambda r: r.utt_id):
        out_path = os.path.join(out_dir, f"{row.utt_id}.tsv")
        if not args.force and os.path.exists(out_path):
            meta = read_alignment(out_path).meta
            if (meta.get("model_sha256") == model_sha
                    and meta.get("config_sha256") == align_sha
                    and meta.get("features_sha256")
                    == sha256_file(_feature_path(args.workdir, row.utt_id))):
                skipped += 1
                continue
        pending.append((row.utt_id, feats_map[row.utt_id], lines_map[row.utt_id]))

    alignments, align_failures = align_corpus(
        pending, model, lexicon, sil=cfg.sil, mus=cfg.mus,
        oov_as_spn=cfg.oov_as_spn, beam=cfg.beam, parallelism=args.workers)
    for utt_id, alignment in alignments.items():
        alignment.meta.update({
            "model_sha256": model_sha,
            "config_sha256": align_sha,
            "features_sha256": sha256_file(_feature_path(args.workdir, utt_id)),
        })
        with open(os.path.join(out_dir, f"{utt_id}.tsv"), "w", encoding="utf-8") as fh:
            fh.write(format_alignment(alignment))
    for utt_id, err in align_failures.items():
        print(f"align {utt_id}: FAILED {err}")
    print(f"align: {len(alignments)} aligned, {skipped} skipped, "
          f"{len(align_failures)} failed -> {out_dir}")
    return 1 if align_failures else 0


def cmd_score(args) -> int:
    cfg = read_config(args.config)
    manifest = read_manifest(args.manifest)
    align_dir = os.path.join(args.workdir, "align")
    records = []
    model_hashes = set()
    for row in sorted(manifest, key=lambda r: r.utt_id):
        alignment = read_alignment(os.path.join(align_dir, f"{row.utt_id}.tsv"))
        model_hashes.add(alignment.meta.get("model_sha256", ""))
        if row.truth is None:
            raise SystemExit(f"manifest row {row.utt_id} has no truth annotation")
        records.extend(pair_words(alignment, read_truth(row.truth)))
    report = aggregate(records, cfg.tolerance_sec)
    report.extras["model_sha256"] = sorted(model_hashes)
    report.extras["config_sha256"] = cfg.digest()
    out_path = args.report or os.path.join(args.workdir, "report.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    print(f"score: n={report.n_words} mean={report.mean_ae_sec:.3f}s "
          f"median={report.median_ae_sec:.3f}s std={report.std_ae_sec:.3f}s "
          f"%C({cfg.tolerance_sec:g}s)={report.pct_correct:.1f} -> {out_path}")
    if args.compare:
        with open(args.compare, "r", encoding="utf-8") as fh:
            other = EvalReport.from_json(fh.read())
        print(format_compare_table(compare_reports(other, report)))
    return 0


def cmd_plot(args) -> int:
    edges = tuple(float(e) for e in args.edges.split(",")) if args.edges \
        else DEFAULT_HISTOGRAM_EDGES
    os.makedirs(args.out_dir, exist_ok=True)
    for report_path in args.reports:
        with open(report_path, "r", encoding="utf-8") as fh:
            report = EvalReport.from_json(fh.read())
        counts, csv_text = histogram(report.per_word, edges)
        stem = os.path.splitext(os.path.basename(report_path))[0]
        out_path = os.path.join(args.out_dir, f"{stem}.hist.csv")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"plot: {report_path} -> {out_path} (n={counts.sum()})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lyralign",
        description="Lyrics-to-audio forced alignment pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True, model=False):
        p.add_argument("--config", required=True, help="key=value pipeline config file")
        p.add_argument("--workdir", default="work", help="artifact directory (default: work)")
        p.add_argument("--force", action="store_true", help="ignore cached artifacts")
        p.add_argument("--workers", type=int, default=None,
                       help="worker pool size (or set LYRALIGN_WORKERS)")
        if manifest:
            p.add_argument("--manifest", required=True,
                           help="TSV: utt_id, audio, lyrics[, truth]")
        if model:
            p.add_argument("--model", required=True, help="LYAM1 model file")

    p = sub.add_parser("extract", help="compute LYF1 feature files")
    common(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="flat-start + EM, then the MLP stage")
    common(p)
    p.add_argument("--gmm-only", action="store_true", help="skip the MLP stage")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("adapt", help="fine-tune the MLP over the LR x epochs grid")
    common(p, model=True)
    p.add_argument("--dev-manifest", required=True,
                   help="dev manifest with truth for grid selection (mean AE)")
    p.set_defaults(fn=cmd_adapt)

    p = sub.add_parser("align", help="write word-boundary TSVs")
    common(p, model=True)
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("score", help="boundary-error report from alignments + truth")
    common(p)
    p.add_argument("--report", default=None, help="output report JSON path")
    p.add_argument("--compare", default=None, help="baseline report JSON to diff against")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("plot", help="export error-distribution histogram CSVs")
    p.add_argument("reports", nargs="+", help="report JSON files")
    p.add_argument("--out-dir", default="work", help="histogram output directory")
    p.add_argument("--edges", default=None,
                   help="comma-separated bin edges (default 0,0.1,0.25,0.5,1,2,5)")
    p.set_defaults(fn=cmd_plot)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
