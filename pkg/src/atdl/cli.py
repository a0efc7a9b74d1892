"""``atdl`` command-line entry point.

Subcommands: ingest, stats, train, verify, intervene, explore, selftest.
Settings come from flags, then an optional JSON ``--config`` file, then
built-in defaults, in that order of precedence.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import binfmt, explore, grad, oracles, stats, trainer, verify
from .corpus import (CorpusConfig, SequenceBatch, Vocab, build_vocab, encode_sequences,
                     load_pretokenized, read_documents)
from .errors import AtdlError, DimensionError, InvariantError
from .model import InitConfig, ModelParams

DEFAULTS = {
    "corpus": None,
    "vocab_cap": 3000,
    "seq_len": 200,
    "max_samples": 65536,
    "tokenizer": "whitespace-punct",
    "vocab_size": None,
    "per_file": False,
    "eta": 0.005,
    "steps": None,
    "epochs": None,
    "batch": "full",
    "layers": 1,
    "init": "zero",
    "v": 0.01,
    "xi": 0.0,
    "seed": 0,
    "out": "atdl_out",
    "workers": None,
    "deterministic": True,
    "format": "text",
    "checkpoint_every": None,
    "basis": "all",
    "k": 30,
    "direction": "row",
}

# settings that do not change any artifact's content
_NOT_HASHED = {"out", "workers", "format", "deterministic", "config"}


def _common(p):
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--corpus")
    p.add_argument("--vocab-cap", type=int)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--max-samples", type=int)
    p.add_argument("--tokenizer", choices=["whitespace-punct", "pre-tokenized-ids"])
    p.add_argument("--vocab-size", type=int, help="vocabulary size for pre-tokenized ids")
    p.add_argument("--per-file", action="store_const", const=True,
                   help="treat each file of a corpus directory as one document")
    p.add_argument("--eta", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", help="'full' or a minibatch size")
    p.add_argument("--layers", type=int)
    p.add_argument("--init", choices=["zero", "gaussian"])
    p.add_argument("--v", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--deterministic", action="store_const", const=True)
    p.add_argument("--format", choices=["json", "csv", "text"])
    p.add_argument("--checkpoint-every", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="atdl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tokenize a corpus into a vocabulary and a batch file")
    _common(p)

    p = sub.add_parser("stats", help="compute the basis statistics of a batch file")
    _common(p)
    p.add_argument("batch_file", nargs="?")

    p = sub.add_parser("train", help="run gradient descent on a batch file")
    _common(p)
    p.add_argument("batch_file", nargs="?")
    p.add_argument("--stats", dest="stats_file")

    p = sub.add_parser("verify", help="compare a checkpoint with its leading terms")
    _common(p)
    p.add_argument("checkpoint")
    p.add_argument("stats_file")

    p = sub.add_parser("intervene", help="loss change after removing leading-term components")
    _common(p)
    p.add_argument("checkpoint")
    p.add_argument("stats_file")
    p.add_argument("batch_file")

    p = sub.add_parser("explore", help="top-k associated tokens under each basis")
    _common(p)
    p.add_argument("stats_file")
    p.add_argument("vocab_file")
    p.add_argument("tokens", nargs="*")
    p.add_argument("--basis", choices=["all", *explore.BASES])
    p.add_argument("--k", type=int)
    p.add_argument("--direction", choices=["row", "column"])

    p = sub.add_parser("selftest", help="finite-difference and oracle checks on tiny fixtures")
    _common(p)
    return ap


def effective_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["workers"] is None:
        env = os.environ.get("ATDL_WORKERS")
        cfg["workers"] = int(env) if env else (os.cpu_count() or 1)
    return cfg


def config_hash(cfg, command):
    return binfmt.config_hash({"command": command,
                               **{k: v for k, v in cfg.items() if k not in _NOT_HASHED}})


def _out_dir(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


def _write_manifest(cfg, command, chash, files):
    path = os.path.join(_out_dir(cfg), f"manifest_{command}.json")
    body = {"command": command, "config": cfg, "config_hash": chash.hex(), "files": files}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _emit(cfg, payload, text):
    fmt = cfg["format"]
    if fmt == "json":
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv" and isinstance(payload, list) and payload and isinstance(payload[0], dict):
        cols = list(payload[0])
        sys.stdout.write(",".join(cols) + "\n")
        for row in payload:
            sys.stdout.write(",".join("" if row[c] is None else str(row[c]) for c in cols) + "\n")
    else:
        sys.stdout.write(text)


def _default_path(cfg, given, name):
    return given if given else os.path.join(cfg["out"], name)


def cmd_ingest(cfg, args, chash):
    if not cfg["corpus"]:
        raise ValueError("--corpus is required for ingest")
    if not os.path.exists(cfg["corpus"]):
        raise FileNotFoundError(cfg["corpus"])
    ccfg = CorpusConfig(vocab_size_cap=cfg["vocab_cap"], seq_len=cfg["seq_len"],
                        max_samples=cfg["max_samples"], tokenizer=cfg["tokenizer"])
    if ccfg.tokenizer == "pre-tokenized-ids":
        if not cfg["vocab_size"]:
            raise ValueError("--vocab-size is required with pre-tokenized ids")
        lines = []
        for doc in read_documents(cfg["corpus"]):
            lines.append(doc.strip())
        batch = load_pretokenized(lines, ccfg, cfg["vocab_size"])
        counts = np.bincount(batch.ids.ravel(), minlength=cfg["vocab_size"])
        vocab = Vocab([str(i) for i in range(cfg["vocab_size"])], [int(c) for c in counts])
    else:
        docs = list(read_documents(cfg["corpus"], per_file=cfg["per_file"]))
        vocab = build_vocab(docs, ccfg)
        batch = encode_sequences(docs, vocab, ccfg)
    out = _out_dir(cfg)
    vpath, bpath = os.path.join(out, "vocab.tsv"), os.path.join(out, "batch.bin")
    vocab.save(vpath)
    batch.save(bpath, chash)
    _write_manifest(cfg, "ingest", chash, [vpath, bpath])
    summary = {"N": batch.n, "T": batch.t, "V": batch.vocab_size}
    _emit(cfg, summary, f"N={batch.n} T={batch.t} |V|={batch.vocab_size}\n")
    return 0


def _load_batch(cfg, path):
    batch = SequenceBatch.load(_default_path(cfg, path, "batch.bin"))
    return batch


def _check_seq_len(args, batch):
    if args.seq_len is not None and args.seq_len != batch.t:
        raise DimensionError(f"--seq-len {args.seq_len} but the batch has T={batch.t}")


def cmd_stats(cfg, args, chash):
    batch = _load_batch(cfg, args.batch_file)
    _check_seq_len(args, batch)
    bs = stats.compute_stats(batch)
    path = os.path.join(_out_dir(cfg), "stats.bin")
    bs.save(path, chash)
    _write_manifest(cfg, "stats", chash, [path])
    summary = stats.invariant_summary(bs)
    text = "".join(f"{k:<24}{v:.3e}\n" for k, v in summary.items())
    _emit(cfg, summary, text)
    bad = stats.check_invariants(bs)
    if bad:
        raise InvariantError("; ".join(bad))
    return 0


def _parse_batch_mode(val):
    if val in (None, "full"):
        return None
    try:
        return int(val)
    except ValueError:
        raise ValueError(f"--batch must be 'full' or an integer, got {val!r}") from None


def cmd_train(cfg, args, chash):
    batch = _load_batch(cfg, args.batch_file)
    _check_seq_len(args, batch)
    bs = stats.BasisStats.load(args.stats_file) if args.stats_file else None
    steps, epochs = cfg["steps"], cfg["epochs"]
    if steps is None and epochs is None:
        steps = 1
    tc = trainer.TrainConfig(
        eta=cfg["eta"], steps=steps, epochs=epochs if steps is None else None,
        batch=_parse_batch_mode(cfg["batch"]),
        init=InitConfig(cfg["init"], cfg["v"], cfg["xi"], cfg["seed"]),
        layers=cfg["layers"], checkpoint_every=cfg["checkpoint_every"], seed=cfg["seed"],
        workers=cfg["workers"])
    out = _out_dir(cfg)
    result = trainer.train(tc, batch, stats=bs, out_dir=out, config_hash=chash)
    final = os.path.join(out, "final.ckpt")
    result.final.save(final)
    _write_manifest(cfg, "train", chash, [final, os.path.join(out, "log.csv")])
    rows = [{k: r.get(k) for k in trainer.LOG_COLUMNS} for r in result.log]
    if cfg["format"] == "csv":
        sys.stdout.write(result.log_csv())
    else:
        text = "".join(f"step {r['step']:>6}  loss {r['loss']:.6f}\n" for r in rows)
        _emit(cfg, rows, text)
    return 0


def cmd_verify(cfg, args, chash):
    ck = trainer.Checkpoint.load(args.checkpoint)
    bs = stats.BasisStats.load(args.stats_file)
    rep = verify.compare(ck, bs)
    if cfg["format"] == "csv":
        sys.stdout.write(verify.reports_to_csv([rep]))
    else:
        _emit(cfg, rep.to_dict(), rep.to_text())
    if rep.all_bounds_hold() is False:
        raise InvariantError("a leading-term bound is violated inside the regime")
    return 0


def cmd_intervene(cfg, args, chash):
    ck = trainer.Checkpoint.load(args.checkpoint)
    bs = stats.BasisStats.load(args.stats_file)
    batch = SequenceBatch.load(args.batch_file)
    rep = verify.intervene(ck, bs, batch, workers=cfg["workers"])
    _emit(cfg, json.loads(rep.to_json()), rep.to_text())
    return 0


def cmd_explore(cfg, args, chash):
    bs = stats.BasisStats.load(args.stats_file)
    vocab = Vocab.load(args.vocab_file)
    bases = explore.BASES if cfg["basis"] == "all" else (cfg["basis"],)
    if cfg["direction"] != "row":
        results = []
        for tok in args.tokens:
            for basis in bases:
                q = explore.AssociationQuery(tok, basis, cfg["k"], cfg["direction"])
                results.append({"token": tok, "basis": basis,
                                "entries": explore.topk(q, bs, vocab)})
        sys.stdout.write(json.dumps(results, indent=2) + "\n")
        return 0
    fmt = "json" if cfg["format"] == "json" else "text"
    sys.stdout.write(explore.dump_association_table(args.tokens, bs, vocab, cfg["k"],
                                                    bases=bases, fmt=fmt))
    missing = [t for t in args.tokens if t not in vocab]
    if missing:
        sys.stderr.write(f"unknown tokens: {' '.join(missing)}\n")
        return explore.UnknownTokenError.exit_code
    return 0


def run_selftest(seed=0, configs=20):
    """Finite-difference and statistic-oracle checks; returns a list of (name, ok, detail)."""
    rng = np.random.default_rng(seed)
    results = []
    worst = 0.0
    for i in range(configs):
        layers = i % 3 + 1
        t, nv, n = int(rng.integers(2, 7)), int(rng.integers(2, 6)), int(rng.integers(1, 5))
        batch = SequenceBatch(rng.integers(0, nv, (n, t + 1)), nv)

        def rnd(*shape):
            return rng.uniform(-0.1, 0.1, shape)

        params = ModelParams([rnd(nv, nv) for _ in range(layers)],
                             [rnd(nv, nv) for _ in range(layers)],
                             [rnd(t) for _ in range(layers)], rnd(nv, nv))
        g = grad.backward(params, batch)
        fd = oracles.finite_difference(params, lambda p: grad.loss(p, batch).mean_nll)
        for (_, _, a), f in zip(g.as_params().arrays(), fd):
            worst = max(worst, relative_error(a, f))
    results.append(("gradient vs finite differences", worst <= 1e-5, f"max rel err {worst:.2e}"))

    worst = 0.0
    for _ in range(configs):
        t, nv, n = int(rng.integers(2, 7)), int(rng.integers(2, 6)), int(rng.integers(1, 9))
        ids = rng.integers(0, nv, (n, t + 1))
        ref = oracles.all_stats(ids, nv)
        got = stats.compute_stats(SequenceBatch(ids, nv))
        for key, val in ref.items():
            worst = max(worst, float(np.abs(val - getattr(got, key)).max()))
    results.append(("statistics vs loop oracles", worst <= 1e-12, f"max abs err {worst:.2e}"))
    return results


def relative_error(analytic, reference, floor=1e-8):
    """Largest absolute difference divided by the reference's largest magnitude."""
    scale = max(float(np.abs(reference).max()), floor)
    return float(np.abs(analytic - reference).max()) / scale


def cmd_selftest(cfg, args, chash):
    results = run_selftest(seed=cfg["seed"])
    payload = [{"check": n, "ok": ok, "detail": d} for n, ok, d in results]
    text = "".join(f"{'PASS' if ok else 'FAIL'}  {n}: {d}\n" for n, ok, d in results)
    _emit(cfg, payload, text)
    if not all(ok for _, ok, _ in results):
        raise InvariantError("selftest failed")
    return 0


COMMANDS = {"ingest": cmd_ingest, "stats": cmd_stats, "train": cmd_train,
            "verify": cmd_verify, "intervene": cmd_intervene, "explore": cmd_explore,
            "selftest": cmd_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        sys.stderr.write("effective config: " + json.dumps(cfg, sort_keys=True) + "\n")
        chash = config_hash(cfg, args.command)
        return COMMANDS[args.command](cfg, args, chash)
    except AtdlError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except (ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
