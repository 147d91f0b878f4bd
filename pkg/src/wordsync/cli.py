"""Command-line entry point: train, parse, score, regress, synthesize.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every run writes a resolved-config copy and a summary next to its outputs,
and all randomness derives from the declared seed.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, lm, metrics, parser, rnng, signals
from .beam import BeamConfig
from .config import ConfigError, Option, read_config_file, resolve_options, write_resolved_config
from .optim import OptimizerState
from .treebank import read_treebank
from .vocab import Vocab, build_vocab, vocab_from_sentences

log = logging.getLogger("wordsync")


class ReportError(RuntimeError):
    pass


# --- option schemas -----------------------------------------------------------

_COMMON = [
    Option("out", str, required=True),
    Option("seed", int, 0),
    Option("log_level", str, "info", choices=("debug", "info", "warning", "error")),
    Option("threads", int, None),
]

_TRAIN_COMMON = [
    Option("train", str, required=True),
    Option("dev", str),
    Option("epochs", int, 50),
    Option("batch_size", int, 16),
    Option("lr", float, 1e-3),
    Option("clip", float, 5.0),
    Option("min_count", int, 2),
    Option("dropout", float, 0.0),
    Option("eval_every", int, 10),
]

_BEAM_OPTS = [
    Option("k", int, required=True),
    Option("word_beam", int),
    Option("fast_track", int),
    Option("iteration_cap", int, 80),
]

SCHEMAS = {
    "train-rnng": _COMMON + _TRAIN_COMMON + [
        Option("variant", str, rnng.FULL, choices=(rnng.FULL, rnng.NO_COMP)),
        Option("hidden", int, 170),
        Option("embedding", int),
        Option("scorer_hidden", int),
        Option("comp_hidden", int),
        Option("max_open", int, 40),
    ],
    "train-lm": _COMMON + _TRAIN_COMMON + [
        Option("hidden", int, 256),
        Option("embedding", int),
        Option("vocab_from", str),
    ],
    "parse": _COMMON + _BEAM_OPTS + [
        Option("model", str, required=True),
        Option("input", str, required=True),
        Option("gold", str),
        Option("emit_metrics", str),
        Option("emit_trees", str),
        Option("function_words", str),
    ],
    "lm-surprisal": _COMMON + [
        Option("model", str, required=True),
        Option("input", str, required=True),
    ],
    "score-f1": _COMMON + [
        Option("gold", str, required=True),
        Option("pred", str, required=True),
    ],
    "regress": _COMMON + [
        Option("epochs", str, required=True),
        Option("metrics", str),
        Option("target", str, required=True),
        Option("controls", str, required=True),
        Option("n_perm", int, 1000),
        Option("threshold_p", float, 0.05),
        Option("roi", str, "P600"),
        Option("roi_channels", str),
        Option("roi_window", str),
        Option("k_label", str, "-"),
        Option("content_only", bool, True),
    ],
    "synth": _COMMON + [
        Option("subjects", int, 20),
        Option("epochs_per_subject", int, 100),
        Option("channels", int, 61),
        Option("grid_cols", int, 9),
        Option("sample_rate", float, 500.0),
        Option("window", str, "-0.3,1.0"),
        Option("noise_sd", float, 1.0),
        Option("target_name", str, "target"),
        Option("amplitude", float, 0.0),
        Option("effect_rows", str, "P,PO"),
        Option("effect_window", str, "0.6,0.7"),
    ],
    "grad-check": _COMMON + [
        Option("seeds", int, 5),
        Option("tolerance", float, 1e-4),
    ],
    "sweep": _COMMON + [
        Option("model", str, required=True),
        Option("input", str, required=True),
        Option("gold", str),
        Option("k_list", str, required=True),
        Option("iteration_cap", int, 80),
        Option("function_words", str),
    ],
}


def _bool_arg(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def build_arg_parser():
    top = argparse.ArgumentParser(prog="wordsync", description=__doc__)
    top.add_argument("--version", action="version", version=f"wordsync {__version__}")
    subs = top.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        sub = subs.add_parser(command)
        sub.add_argument("--config", default=None)
        for opt in schema:
            flag = "--" + opt.name.replace("_", "-")
            if opt.type is bool:
                sub.add_argument(flag, dest=opt.name, default=None, type=_bool_arg)
            else:
                sub.add_argument(flag, dest=opt.name, default=None, type=opt.type)
    return top


def _resolve(args):
    schema = SCHEMAS[args.command]
    file_values = read_config_file(args.config) if args.config else {}
    cli_values = {opt.name: getattr(args, opt.name) for opt in schema}
    return resolve_options(schema, file_values, cli_values)


def _prepare_out(resolved, command):
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    record = dict(resolved)
    record["subcommand"] = command
    write_resolved_config(record, out / "resolved.cfg", __version__)
    return out


def _read_sentences(path):
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                sentences.append(tokens)
    return sentences


def _read_function_words(path):
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def _pair_floats(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected 'a,b', got {text!r}")
    return float(parts[0]), float(parts[1])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --- training -----------------------------------------------------------------

def _training_loop(trees_or_sents, step_fn, eval_fn, epochs, batch_size, rng,
                   log_path, ppl_column, eval_every=10):
    rows = [("epoch", "train_loss", ppl_column)]
    if eval_fn is not None:
        rows.append(("0", "nan", _fmt(eval_fn())))
    items = list(trees_or_sents)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(items))
        losses = []
        for start in range(0, len(items), batch_size):
            batch = [items[i] for i in order[start:start + batch_size]]
            losses.append(step_fn(batch))
        mean_loss = float(np.mean(losses))
        ppl = _fmt(eval_fn()) if (eval_fn is not None and
                                  (epoch % max(1, eval_every) == 0
                                   or epoch == epochs)) else "nan"
        rows.append((str(epoch), _fmt(mean_loss), ppl))
        log.info("epoch %d: train loss %.4f%s", epoch, mean_loss,
                 f", {ppl_column} {ppl}" if ppl != "nan" else "")
    with open(log_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


def run_train_rnng(resolved, out):
    trees = read_treebank(resolved["train"])
    dev = read_treebank(resolved["dev"]) if resolved["dev"] else None
    vocab = build_vocab(trees, min_count=resolved["min_count"])
    cfg = rnng.RnngConfig(
        hidden_size=resolved["hidden"],
        embedding_size=resolved["embedding"] or resolved["hidden"],
        scorer_hidden=resolved["scorer_hidden"],
        comp_hidden=resolved["comp_hidden"],
        variant=resolved["variant"],
        max_open=resolved["max_open"],
        dropout=resolved["dropout"],
    )
    rng = np.random.default_rng(resolved["seed"])
    params = rnng.RnngParams(vocab, cfg, rng)
    opt = OptimizerState(params.parameters().values(),
                         learning_rate=resolved["lr"], clip_norm=resolved["clip"])
    dropout_rng = np.random.default_rng(resolved["seed"] + 1)
    _training_loop(
        trees,
        lambda batch: rnng.train_step(batch, params, opt, dropout_rng),
        (lambda: metrics.action_perplexity(dev, params)) if dev else None,
        resolved["epochs"], resolved["batch_size"], rng,
        out / "training_log.tsv", "dev_rnng_action_ppl_per_word",
        eval_every=resolved["eval_every"])
    rnng.save_rnng(out / "model.npz", params)
    log.info("saved %s", out / "model.npz")
    return 0


def run_train_lm(resolved, out):
    sentences = _read_sentences(resolved["train"])
    dev = _read_sentences(resolved["dev"]) if resolved["dev"] else None
    if resolved["vocab_from"]:
        from .checkpoint import load_checkpoint
        _, meta = load_checkpoint(resolved["vocab_from"])
        vocab = Vocab.from_dict(meta["vocab"])
    else:
        vocab = vocab_from_sentences(sentences, min_count=resolved["min_count"])
    cfg = lm.LmConfig(hidden_size=resolved["hidden"],
                      embedding_size=resolved["embedding"],
                      dropout=resolved["dropout"])
    rng = np.random.default_rng(resolved["seed"])
    params = lm.LmParams(vocab, cfg, rng)
    opt = OptimizerState(params.parameters().values(),
                         learning_rate=resolved["lr"], clip_norm=resolved["clip"])
    dropout_rng = np.random.default_rng(resolved["seed"] + 1)
    _training_loop(
        sentences,
        lambda batch: lm.lm_train_step(batch, params, opt, dropout_rng),
        (lambda: lm.perplexity(dev, params)) if dev else None,
        resolved["epochs"], resolved["batch_size"], rng,
        out / "training_log.tsv", "dev_lm_word_ppl",
        eval_every=resolved["eval_every"])
    lm.save_lm(out / "model.npz", params)
    log.info("saved %s", out / "model.npz")
    return 0


# --- parsing ------------------------------------------------------------------

def _beam_config(resolved):
    return BeamConfig(k=resolved["k"], k_word=resolved.get("word_beam"),
                      k_ft=resolved.get("fast_track"),
                      iteration_cap=resolved["iteration_cap"])


def _write_trees(trees, path):
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write((tree.render() if tree is not None else "") + "\n")


def _write_f1(f1, path):
    precision, recall, score = f1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"precision\t{_fmt(precision)}\n")
        fh.write(f"recall\t{_fmt(recall)}\n")
        fh.write(f"f1\t{_fmt(score)}\n")


def run_parse(resolved, out):
    params = rnng.load_rnng(resolved["model"])
    sentences = _read_sentences(resolved["input"])
    gold = read_treebank(resolved["gold"]) if resolved["gold"] else None
    if gold is not None and len(gold) != len(sentences):
        raise RuntimeError(f"{len(gold)} gold trees for {len(sentences)} sentences")
    function_words = _read_function_words(resolved["function_words"])
    cfg = _beam_config(resolved)
    results, exhausted = parser.parse_corpus(params, sentences, cfg)
    rows = []
    trees = []
    for i, (tree, records) in enumerate(results):
        rows.extend(metrics.records_to_rows(i, sentences[i], records, function_words))
        trees.append(tree)
    metrics_path = Path(resolved["emit_metrics"]) if resolved["emit_metrics"] else out / "metrics.tsv"
    trees_path = Path(resolved["emit_trees"]) if resolved["emit_trees"] else out / "trees.mrg"
    metrics.write_metrics_tsv(rows, metrics_path)
    _write_trees(trees, trees_path)
    log.info("parsed %d sentences (%d exhausted)", len(sentences), len(exhausted))
    if gold is not None:
        pairs = [(g, t) for g, t in zip(gold, trees) if t is not None]
        f1 = metrics.bracket_f1([g for g, _ in pairs], [t for _, t in pairs])
        _write_f1(f1, out / "f1.txt")
        log.info("bracket F1 %.2f", f1[2])
    return 0


def run_lm_surprisal(resolved, out):
    params = lm.load_lm(resolved["model"])
    sentences = _read_sentences(resolved["input"])
    with open(out / "surprisal.tsv", "w", encoding="utf-8") as fh:
        for tokens in sentences:
            for token, s in zip(tokens, lm.lm_surprisal_series(tokens, params)):
                fh.write(f"{token}\t{_fmt(s)}\n")
    return 0


def run_score_f1(resolved, out):
    gold = read_treebank(resolved["gold"])
    pred_lines = Path(resolved["pred"]).read_text(encoding="utf-8").splitlines()
    if len(pred_lines) != len(gold):
        raise RuntimeError(f"{len(gold)} gold trees for {len(pred_lines)} predictions")
    from .treebank import parse_bracketed
    per_sentence = []
    kept_gold, kept_pred = [], []
    skipped = 0
    for i, (g, line) in enumerate(zip(gold, pred_lines)):
        if not line.strip():
            skipped += 1
            per_sentence.append((i, "skipped"))
            continue
        tree = parse_bracketed(line)
        kept_gold.append(g)
        kept_pred.append(tree)
        p, r, f = metrics.bracket_f1([g], [tree])
        per_sentence.append((i, _fmt(f)))
    f1 = metrics.bracket_f1(kept_gold, kept_pred)
    _write_f1(f1, out / "f1.txt")
    with open(out / "f1_per_sentence.tsv", "w", encoding="utf-8") as fh:
        fh.write("sent\tf1\n")
        for i, value in per_sentence:
            fh.write(f"{i}\t{value}\n")
    print(f"precision {f1[0]:.2f} recall {f1[1]:.2f} F1 {f1[2]:.2f} "
          f"({skipped} sentences skipped)")
    return 0


# --- regression ---------------------------------------------------------------

def run_regress(resolved, out):
    from . import regression

    epochs = signals.load_epochs(resolved["epochs"])
    if resolved["metrics"]:
        rows = metrics.read_metrics_tsv(resolved["metrics"])
        epochs = attach_metric_columns(epochs, rows)
    if resolved["content_only"] and "content" in epochs.metadata:
        mask = np.asarray(epochs.metadata["content"], dtype=np.float64) > 0
        epochs = subset_epochs(epochs, mask)
    controls = [c.strip() for c in resolved["controls"].split(",") if c.strip()]
    design = regression.build_design(epochs.metadata, resolved["target"], controls)
    threads = resolved["threads"] or os.cpu_count() or 1
    clusters = regression.cluster_permutation_test(
        epochs, design, n_perm=resolved["n_perm"],
        threshold_p=resolved["threshold_p"], seed=resolved["seed"],
        n_threads=threads)
    times = epochs.times
    with open(out / "clusters.tsv", "w", encoding="utf-8") as fh:
        fh.write("cluster\tpolarity\tsize\tmass\tp\tt_start\tt_end\tchannels\n")
        for ci, c in enumerate(clusters):
            tps = sorted(t for _, t in c.members)
            chs = sorted({epochs.channel_names[ch] for ch, _ in c.members})
            fh.write(f"{ci}\t{c.polarity}\t{len(c.members)}\t{_fmt(c.mass)}\t"
                     f"{_fmt(c.p_value)}\t{_fmt(float(times[tps[0]]))}\t"
                     f"{_fmt(float(times[tps[-1]]))}\t{','.join(chs)}\n")
    if resolved["roi"] == "custom":
        if not (resolved["roi_channels"] and resolved["roi_window"]):
            raise ConfigError("custom ROI needs --roi-channels and --roi-window")
        channels = [c.strip() for c in resolved["roi_channels"].split(",")]
        window = _pair_floats(resolved["roi_window"])
    else:
        ch_idx, window = signals.preset_region(epochs, resolved["roi"])
        channels = [epochs.channel_names[i] for i in ch_idx]
    series = regression.roi_average(epochs, channels, window)
    d0 = regression.build_design(epochs.metadata, None, controls)
    chi2, df, p = regression.lrt_compare(series, d0, design, epochs.metadata["subject"])
    with open(out / "lrt.tsv", "w", encoding="utf-8") as fh:
        fh.write("target\tk\troi\tchi2\tdf\tp\n")
        fh.write(f"{resolved['target']}\t{resolved['k_label']}\t{resolved['roi']}\t"
                 f"{_fmt(chi2)}\t{df}\t{_fmt(p)}\n")
    fit = regression.fit_pointwise(epochs, design)
    with open(out / "diagnostics.txt", "w", encoding="utf-8") as fh:
        fh.write(f"residual_ar1\t{_fmt(fit.ar1())}\n")
        fh.write(f"significant_clusters\t{sum(1 for c in clusters if c.p_value < 0.05)}\n")
    log.info("%d clusters, min p %s", len(clusters),
             min((c.p_value for c in clusters), default="n/a"))
    return 0


def subset_epochs(epochs, mask):
    mask = np.asarray(mask, dtype=bool)
    metadata = {}
    for name, col in epochs.metadata.items():
        if isinstance(col, np.ndarray):
            metadata[name] = col[mask]
        else:
            metadata[name] = [v for v, keep in zip(col, mask) if keep]
    return signals.EpochSet(epochs.data[mask], epochs.sample_rate, epochs.window,
                            list(epochs.channel_names), list(epochs.adjacency), metadata)


def attach_metric_columns(epochs, rows):
    """Join parser metric rows onto epochs by order, verifying token identity."""
    usable = [r for r in rows if not r.exhausted]
    if len(usable) != epochs.n_epochs:
        raise RuntimeError(f"{len(usable)} metric rows for {epochs.n_epochs} epochs")
    tokens = epochs.metadata.get("token")
    if tokens is not None:
        for i, (r, t) in enumerate(zip(usable, tokens)):
            if str(t) != r.token:
                raise RuntimeError(f"token mismatch at epoch {i}: metrics row has "
                                   f"{r.token!r}, epochs have {t!r}")
    metadata = dict(epochs.metadata)
    for name in ("distance", "surprisal", "entropy", "entropy_delta"):
        metadata[name] = np.array([getattr(r, name) for r in usable], dtype=np.float64)
    return signals.EpochSet(epochs.data, epochs.sample_rate, epochs.window,
                            list(epochs.channel_names), list(epochs.adjacency), metadata)


def run_synth(resolved, out):
    spec = signals.SynthSpec(
        n_subjects=resolved["subjects"],
        epochs_per_subject=resolved["epochs_per_subject"],
        n_channels=resolved["channels"],
        n_cols=resolved["grid_cols"],
        sample_rate=resolved["sample_rate"],
        window=_pair_floats(resolved["window"]),
        noise_sd=resolved["noise_sd"],
        target_name=resolved["target_name"],
        effect_amplitude=resolved["amplitude"],
        effect_rows=tuple(r.strip() for r in resolved["effect_rows"].split(",")),
        effect_window=_pair_floats(resolved["effect_window"]),
    )
    epochs = signals.synth_epochs(spec, seed=resolved["seed"])
    signals.save_epochs(epochs, out / "epochs")
    log.info("wrote %s.dat / .tsv (%d epochs)", out / "epochs", epochs.n_epochs)
    return 0


def run_grad_check(resolved, out):
    from . import autograd as ag
    from . import nn
    from .treebank import parse_bracketed

    tol = resolved["tolerance"]
    report_lines = []
    worst_overall = 0.0
    for seed in range(resolved["seeds"]):
        rng = np.random.default_rng(resolved["seed"] + seed)
        sizes = rng.integers(2, 6, size=2)
        cell = nn.RnnCellParams(int(sizes[0]), int(sizes[1]), rng, "chk")
        x = ag.constant(rng.normal(size=int(sizes[0])))
        h0 = ag.constant(rng.normal(size=int(sizes[1])))
        c0 = ag.constant(rng.normal(size=int(sizes[1])))

        def lstm_loss():
            h, c = nn.lstm_step(x, h0, c0, cell)
            return ag.sum_(ag.mul(h, c))

        err = ag.finite_diff_check(lstm_loss, list(cell.parameters().values()), rng=rng)
        report_lines.append(f"lstm_step seed={seed} max_rel_err={err:.3e}")
        worst_overall = max(worst_overall, err)

        fwd = nn.RnnCellParams(3, 4, rng, "f")
        bwd = nn.RnnCellParams(3, 4, rng, "b")
        proj = nn.MlpParams([8, 3], ["tanh"], rng, "p")
        seq = [ag.constant(rng.normal(size=3)) for _ in range(3)]

        def comp_loss():
            return ag.sum_(nn.bilstm_encode(seq, fwd, bwd, proj))

        comp_params = (list(fwd.parameters().values()) + list(bwd.parameters().values())
                       + list(proj.parameters().values()))
        err = ag.finite_diff_check(comp_loss, comp_params, rng=rng)
        report_lines.append(f"composition seed={seed} max_rel_err={err:.3e}")
        worst_overall = max(worst_overall, err)

        tree = parse_bracketed("(S (NP a b) (VP c))")
        vocab = build_vocab([tree], min_count=1)
        cfg = rnng.RnngConfig(hidden_size=5, embedding_size=4, variant=rnng.FULL)
        params = rnng.RnngParams(vocab, cfg, rng)

        def sentence_loss():
            nll, _ = rnng.sentence_nll(tree, params)
            return nll

        err = ag.finite_diff_check(sentence_loss, list(params.parameters().values()),
                                   max_coords=3, rng=rng)
        report_lines.append(f"rnng_sentence seed={seed} max_rel_err={err:.3e}")
        worst_overall = max(worst_overall, err)
    report = "\n".join(report_lines) + f"\nworst {worst_overall:.3e} tolerance {tol:.1e}\n"
    (out / "grad_check.txt").write_text(report, encoding="utf-8")
    print(report, end="")
    if worst_overall >= tol:
        raise RuntimeError(f"gradient check failed: {worst_overall:.3e} >= {tol:.1e}")
    return 0


def run_sweep(resolved, out):
    params = rnng.load_rnng(resolved["model"])
    sentences = _read_sentences(resolved["input"])
    gold = read_treebank(resolved["gold"]) if resolved["gold"] else None
    function_words = _read_function_words(resolved["function_words"])
    k_list = [int(k) for k in resolved["k_list"].split(",") if k.strip()]
    reports = parser.beam_sweep(params, sentences, gold, k_list,
                                function_words=function_words,
                                cfg_overrides={"iteration_cap": resolved["iteration_cap"]})
    with open(out / "sweep_summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("k\tk_word\tk_ft\tf1\texhausted\n")
        for rep in reports:
            sub = out / f"k_{rep['k']}"
            sub.mkdir(exist_ok=True)
            metrics.write_metrics_tsv(rep["rows"], sub / "metrics.tsv")
            _write_trees(rep["trees"], sub / "trees.mrg")
            if rep["f1"] is not None:
                _write_f1(rep["f1"], sub / "f1.txt")
            f1_text = _fmt(rep["f1"][2]) if rep["f1"] is not None else "nan"
            fh.write(f"{rep['k']}\t{rep['k_word']}\t{rep['k_ft']}\t{f1_text}\t"
                     f"{len(rep['exhausted_sentences'])}\n")
    return 0


# --- run reporting -------------------------------------------------------------

def pipeline_report(run_dir):
    """Human-readable summary of a completed run directory."""
    run_dir = Path(run_dir)
    expected = ["resolved.cfg", "training_log.tsv | metrics.tsv | clusters.tsv | "
                "sweep_summary.tsv | f1.txt | grad_check.txt"]
    if not (run_dir / "resolved.cfg").exists():
        raise ReportError(f"{run_dir} is not a run directory; expected at least: "
                          f"{expected}")
    sections = [f"run directory: {run_dir}"]
    for line in (run_dir / "resolved.cfg").read_text(encoding="utf-8").splitlines():
        if line.startswith("subcommand") or line.startswith("version"):
            sections.append(line)

    def describe_dir(d, prefix=""):
        found = []
        tlog = d / "training_log.tsv"
        if tlog.exists():
            lines = [l.split("\t") for l in tlog.read_text(encoding="utf-8").splitlines()]
            header, body = lines[0], lines[1:]
            if body:
                final = body[-1]
                found.append(f"{prefix}training: {len(body)} epochs logged, "
                             f"final train_loss {final[1]}")
                evaluated = [r for r in body if r[2] != "nan"]
                if evaluated:
                    found.append(f"{prefix}final {header[2]}: {evaluated[-1][2]}")
        mfile = d / "metrics.tsv"
        if mfile.exists():
            rows = metrics.read_metrics_tsv(mfile)
            ok = [r for r in rows if not r.exhausted]
            found.append(f"{prefix}metrics: {len(rows)} rows, "
                         f"{len(rows) - len(ok)} exhausted")
            for name in ("distance", "surprisal", "entropy", "entropy_delta"):
                vals = [getattr(r, name) for r in ok]
                if vals:
                    found.append(f"{prefix}  {name}: mean {np.mean(vals):.4f} "
                                 f"min {min(vals):.4f} max {max(vals):.4f}")
        ffile = d / "f1.txt"
        if ffile.exists():
            parts = dict(l.split("\t") for l in
                         ffile.read_text(encoding="utf-8").splitlines())
            found.append(f"{prefix}bracket F1: {float(parts['f1']):.2f} "
                         f"(P {float(parts['precision']):.2f}, "
                         f"R {float(parts['recall']):.2f})")
        cfile = d / "clusters.tsv"
        if cfile.exists():
            lines = cfile.read_text(encoding="utf-8").splitlines()[1:]
            sig = sum(1 for l in lines if float(l.split("\t")[4]) < 0.05)
            found.append(f"{prefix}clusters: {len(lines)} found, {sig} with p < 0.05")
        lfile = d / "lrt.tsv"
        if lfile.exists():
            lines = lfile.read_text(encoding="utf-8").splitlines()[1:]
            for l in lines:
                target, k, roi, chi2, df, p = l.split("\t")
                found.append(f"{prefix}LRT {target} (k={k}, {roi}): "
                             f"chi2 {float(chi2):.3f}, df {df}, p {float(p):.5f}")
        gfile = d / "grad_check.txt"
        if gfile.exists():
            found.append(f"{prefix}grad check: "
                         + gfile.read_text(encoding="utf-8").splitlines()[-1])
        return found

    body = describe_dir(run_dir)
    sweep_file = run_dir / "sweep_summary.tsv"
    if sweep_file.exists():
        for line in sweep_file.read_text(encoding="utf-8").splitlines()[1:]:
            k = line.split("\t")[0]
            body.append(f"[k={k}]")
            body.extend(describe_dir(run_dir / f"k_{k}", prefix="  "))
    if not body:
        raise ReportError(f"{run_dir}: no run artifacts found; expected one of "
                          f"{expected}")
    return "\n".join(sections + body) + "\n"


RUNNERS = {
    "train-rnng": run_train_rnng,
    "train-lm": run_train_lm,
    "parse": run_parse,
    "lm-surprisal": run_lm_surprisal,
    "score-f1": run_score_f1,
    "regress": run_regress,
    "synth": run_synth,
    "grad-check": run_grad_check,
    "sweep": run_sweep,
}


def main(argv=None):
    args = build_arg_parser().parse_args(argv)
    try:
        resolved = _resolve(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, resolved["log_level"].upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = _prepare_out(resolved, args.command)
        code = RUNNERS[args.command](resolved, out)
        summary = pipeline_report(out)
        (out / "summary.txt").write_text(summary, encoding="utf-8")
        return code
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure category
        log.error("%s: %s", type(err).__name__, err)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
