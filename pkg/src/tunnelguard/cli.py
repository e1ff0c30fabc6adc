"""Command line entry point: ``tunnelguard <command> ...``."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import signal
import sys
from pathlib import Path

from .classifier import Classifier
from .codec import InvalidName
from .registry import ALPHABETS, CUSTOM_PREFIX, Registry, RegistryError, TunnelPattern
from .service.config import ServiceConfig, load_config
from .uniformity import UniformityTracker, read_snapshot

log = logging.getLogger("tunnelguard")


def _load(args) -> ServiceConfig:
    cfg = load_config(args.config)
    overrides = {}
    for pair in getattr(args, "set", None) or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise SystemExit(f"--set expects key=value, got {pair!r}")
        overrides[key.replace("-", "_")] = value
    for key in (
        "mode", "listen", "upstream", "validator_upstream", "normal_upstream", "policy", "log",
        "registry", "blacklist", "timeout", "retries", "min_ttl", "max_ttl", "negative_ttl",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "promote_detections", False):
        overrides["promote_detections"] = True
    return cfg.with_overrides(**overrides)


def _registry_path(args, cfg: ServiceConfig | None = None) -> Path:
    path = args.registry or (cfg.registry if cfg else None)
    if not path:
        raise SystemExit("no registry file: pass --registry PATH")
    return Path(path)


def _open_registry(path: Path) -> Registry:
    return Registry.load(path) if path.exists() else Registry()


# -- commands -----------------------------------------------------------


def cmd_serve(args) -> int:
    from .service.server import build_frontend, start_server

    cfg = _load(args)

    async def run():
        frontend = build_frontend(cfg)
        server = await start_server(frontend)
        host, port = server.address
        log.info("%s listening on %s:%d", cfg.mode.value, host, port)
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        # SIGUSR1 clears the zone statistics
        loop.add_signal_handler(signal.SIGUSR1, frontend.classifier.tracker.reset)
        await stop.wait()
        await server.close()
        if frontend.log.dropped:
            log.warning("%d log records were dropped", frontend.log.dropped)

    asyncio.run(run())
    return 0


def cmd_classify(args) -> int:
    cfg = _load(args)
    registry = None
    if args.registry or cfg.registry:
        registry = _open_registry(_registry_path(args, cfg))
    if cfg.blacklist:
        registry = registry or Registry()
        registry.import_blacklist(cfg.blacklist)
    tracker = None
    if args.zones:
        tracker = UniformityTracker.from_snapshot(read_snapshot(args.zones), cfg.classifier.zone_depth)
    clf = Classifier(cfg.classifier, registry, tracker)
    names = [line.strip() for line in open(args.input, encoding="utf-8") if line.strip() and not line.startswith("#")]
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    status = 0
    try:
        for name in names:
            try:
                verdict = clf.classify(name)
            except InvalidName as exc:
                print(f"skipping {name!r}: {exc}", file=sys.stderr)
                status = 1
                continue
            out.write(json.dumps({"qname": name, **verdict.to_dict()}) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return status


def _pattern_from_args(args) -> TunnelPattern:
    lo, sep, hi = args.labels.partition("..")
    if not sep:
        lo = hi = args.labels
    return TunnelPattern(args.alphabet, args.max_label_length, args.max_total_length, int(lo), int(hi))


def cmd_registry(args) -> int:
    path = _registry_path(args)
    reg = _open_registry(path)
    try:
        if args.action == "add":
            entry = reg.register(args.domain, _pattern_from_args(args), args.registrant)
            print(f"registered {entry.domain}")
        elif args.action == "invalidate":
            reg.invalidate(args.domain)
            print(f"invalidated {args.domain}; now blacklisted")
        elif args.action == "import-blacklist":
            n = reg.import_blacklist(args.file, args.provenance)
            print(f"added {n} blacklist entries")
        elif args.action == "list":
            for rec in reg.records():
                print(json.dumps(rec, sort_keys=True))
            return 0
    except (RegistryError, InvalidName, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    reg.save(path)
    return 0


def cmd_gen(args) -> int:
    from .lab.corpus import CorpusSpec, generate, standard_corpus, write_corpus, write_labels

    if args.kind == "standard":
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pairs = standard_corpus(seed=args.seed, count=args.count)
        write_corpus([n for n, _ in pairs], out / "corpus.txt")
        write_labels(pairs, out / "labels.tsv")
        print(f"wrote {len(pairs)} names to {out}")
        return 0
    payload = args.payload_bytes
    if payload is not None and ".." in payload:
        lo, _, hi = payload.partition("..")
        payload = (int(lo), int(hi))
    elif payload is not None:
        payload = int(payload)
    spec_args = dict(kind=args.kind, count=args.count, seed=args.seed)
    if args.kind == "tunnel":
        spec_args.update(payload_bytes=payload or 30, encoding=args.encoding, suffix=args.suffix,
                         labels_per_name=args.labels_per_name)
    else:
        spec_args.update(dictionary_path=args.dictionary)
    names = generate(CorpusSpec(**spec_args))
    if args.output:
        write_corpus(names, args.output)
    else:
        sys.stdout.write("".join(n + "\n" for n in names))
    return 0


def cmd_eval(args) -> int:
    from .lab.corpus import read_labels, read_names
    from .lab.evaluate import evaluate

    cfg = _load(args)
    labels = read_labels(args.labels)
    names = read_names(args.corpus) if args.corpus else list(labels)
    missing = [n for n in names if n not in labels]
    if missing:
        raise SystemExit(f"{len(missing)} corpus names have no label, e.g. {missing[0]!r}")
    report = evaluate([(n, labels[n]) for n in names], cfg.classifier)
    doc = report.to_json()
    if args.report:
        Path(args.report).write_text(doc + "\n", encoding="utf-8")
    else:
        print(doc)
    if args.roc:
        Path(args.roc).write_text(report.roc_csv(), encoding="utf-8")
    print(
        f"AUC={report.auc:.4f} TPR@FPR<=0.05={report.tpr_at_fpr['0.05']:.4f} "
        f"confusion={report.confusion} runtime={report.runtime_s:.2f}s",
        file=sys.stderr,
    )
    return 0


# -- parser -------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any service config key")
    p.add_argument("--log", help="JSON-lines traffic log path")
    p.add_argument("--policy", choices=["nxdomain", "servfail", "drop"])
    p.add_argument("--registry", help="registry JSON-lines file")
    p.add_argument("--blacklist", help="plain-text blacklist to import at start")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunnelguard", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the validator or splitter")
    _common(p)
    p.add_argument("--mode", choices=["validator", "splitter"])
    p.add_argument("--listen")
    p.add_argument("--upstream", help="validator mode: resolver to forward secure queries to")
    p.add_argument("--validator-upstream", dest="validator_upstream")
    p.add_argument("--normal-upstream", dest="normal_upstream")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--min-ttl", dest="min_ttl", type=int)
    p.add_argument("--max-ttl", dest="max_ttl", type=int)
    p.add_argument("--negative-ttl", dest="negative_ttl", type=int)
    p.add_argument("--promote-detections", action="store_true",
                   help="blacklist zones found answering uniformly")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("classify", help="classify names offline, one JSON verdict per line")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--zones", help="zone snapshot (JSON lines) to seed uniformity state")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("registry", help="manage the tunnel registry")
    rsub = p.add_subparsers(dest="action", required=True)
    alphabets = sorted(ALPHABETS)
    for name in ("add", "invalidate", "list", "import-blacklist"):
        rp = rsub.add_parser(name)
        rp.add_argument("--registry", required=True)
        if name in ("add", "invalidate"):
            rp.add_argument("domain")
        if name == "add":
            rp.add_argument("--alphabet", default="base32",
                            help=f"one of {', '.join(alphabets)} or {CUSTOM_PREFIX}<chars>")
            rp.add_argument("--max-label-length", type=int, default=63)
            rp.add_argument("--max-total-length", type=int, default=253)
            rp.add_argument("--labels", default="1..4", help="encoded label count range, e.g. 1..4")
            rp.add_argument("--registrant", default="")
        if name == "import-blacklist":
            rp.add_argument("file")
            rp.add_argument("--provenance", default="imported", choices=["imported", "detected"])
    p.set_defaults(func=cmd_registry)

    p = sub.add_parser("gen", help="generate synthetic corpora")
    p.add_argument("kind", choices=["benign", "tunnel", "standard"])
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=2016)
    p.add_argument("--output")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--dictionary")
    p.add_argument("--payload-bytes", help="N or LO..HI")
    p.add_argument("--encoding", default="base32", choices=["base32", "base64url", "hex"])
    p.add_argument("--suffix", default="t.example")
    p.add_argument("--labels-per-name", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="score a labelled corpus and report ROC/AUC")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--labels", required=True)
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--roc", help="write the ROC table as CSV")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
