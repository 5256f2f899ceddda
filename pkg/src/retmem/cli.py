"""Command-line entry point: chat, gen, eval, mem."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from retmem.controller import Session, SessionConfig
from retmem.dataset import CorpusSpec, build_corpus, emit_corpus, load_corpus
from retmem.errors import BackendUnavailable, CallBudgetExceeded, InvalidQueryShape, MalformedSnapshot
from retmem.evaluation import evaluate, validate_corpus
from retmem.index import EmbedderSpec
from retmem.memory import ConflictPolicy, MemoryConfig, MemoryStore, TripletQuery
from retmem.mock import MockBackend

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_BACKEND = 4

log = logging.getLogger("retmem")


class ConfigError(Exception):
    pass


@dataclass
class CliConfig:
    backend: str = "mock"
    snapshot: Optional[str] = None
    conflict_policy: str = ConflictPolicy.APPEND_ALL.value
    embedder: str = "trigram"
    embedder_dim: int = 64
    embedder_endpoint: Optional[str] = None
    lsh_tables: int = 16
    lsh_bits: int = 8
    threshold: float = 0.7
    max_steps: int = 16
    max_reads: int = 8
    max_writes: int = 64
    seed: int = 0
    endpoint: Optional[str] = None
    timeout: float = 30.0
    token_env: str = "RETMEM_TOKEN"

    def validate(self) -> "CliConfig":
        if self.backend not in ("mock", "remote"):
            raise ConfigError(f"backend must be 'mock' or 'remote', got {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ConfigError("the remote backend needs an endpoint")
        if self.embedder not in ("trigram", "external"):
            raise ConfigError(f"embedder must be 'trigram' or 'external', got {self.embedder!r}")
        try:
            ConflictPolicy(self.conflict_policy)
        except ValueError:
            choices = ", ".join(p.value for p in ConflictPolicy)
            raise ConfigError(f"conflict_policy must be one of {choices}") from None
        for name in ("embedder_dim", "lsh_tables", "lsh_bits", "max_steps", "max_reads", "max_writes", "timeout"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("threshold must lie in (0, 1]")
        return self

    def memory_config(self) -> MemoryConfig:
        return MemoryConfig(
            conflict_policy=ConflictPolicy(self.conflict_policy),
            fuzzy_threshold=self.threshold,
            embedder=EmbedderSpec(
                self.embedder, self.embedder_dim, self.seed, self.embedder_endpoint, self.timeout, self.token_env
            ),
            lsh_tables=self.lsh_tables,
            lsh_bits=self.lsh_bits,
            lsh_seed=self.seed,
        )

    def session_config(self) -> SessionConfig:
        return SessionConfig(self.max_steps, self.max_reads, self.max_writes)

    def make_backend(self):
        if self.backend == "mock":
            return MockBackend()
        from retmem.remote import RemoteBackend, RemoteBackendConfig

        return RemoteBackend(
            RemoteBackendConfig(self.endpoint, self.timeout, self.token_env, seed=self.seed)
        )


_FIELDS = {f.name: f for f in dataclasses.fields(CliConfig)}


def load_config(path: Optional[str], overrides: dict) -> CliConfig:
    values: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(raw) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values.update(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CliConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("engine")
    g.add_argument("--config", help="JSON config file; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--backend", choices=["mock", "remote"])
    g.add_argument("--endpoint", help="remote completion endpoint URL")
    g.add_argument("--token-env", dest="token_env", help="environment variable holding the remote token")
    g.add_argument("--timeout", type=float)
    g.add_argument("--snapshot", help="memory snapshot file (JSON lines)")
    g.add_argument("--policy", dest="conflict_policy", choices=[p.value for p in ConflictPolicy])
    g.add_argument("--embedder", choices=["trigram", "external"])
    g.add_argument("--embedder-dim", dest="embedder_dim", type=int)
    g.add_argument("--embedder-endpoint", dest="embedder_endpoint")
    g.add_argument("--lsh-tables", dest="lsh_tables", type=int)
    g.add_argument("--lsh-bits", dest="lsh_bits", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--max-steps", dest="max_steps", type=int)
    g.add_argument("--max-reads", dest="max_reads", type=int)
    g.add_argument("--max-writes", dest="max_writes", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retmem", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chat", help="interactive session (reads lines from stdin)")
    _common(p)
    p.add_argument("--trace", action="store_true", help="also print raw traces and effects")
    p.add_argument("--log", help="append one JSON record per turn to this file")

    p = sub.add_parser("gen", help="generate a synthetic fine-tuning corpus")
    _common(p)
    p.add_argument("--out", default="corpus.jsonl")
    p.add_argument("--population", type=int, default=500)
    p.add_argument("--reads", type=int, default=3000)
    p.add_argument("--writes", type=int, default=1000)
    p.add_argument("--group-min", type=int, default=2)
    p.add_argument("--group-max", type=int, default=5)
    p.add_argument("--shuffle", action="store_true")

    p = sub.add_parser("eval", help="closed-loop evaluation over a corpus")
    _common(p)
    p.add_argument("corpus")
    p.add_argument("--validate-corpus", action="store_true", help="run the consistency oracle only")
    p.add_argument("--typos", action="store_true", help="inject one edit into person names in questions")
    p.add_argument("--limit", type=int)
    p.add_argument("--report", help="write the metrics report here as JSON")

    p = sub.add_parser("mem", help="inspect a memory snapshot")
    _common(p)
    mem_sub = p.add_subparsers(dest="action", required=True)
    mem_sub.add_parser("dump")
    q = mem_sub.add_parser("query")
    q.add_argument("--t1")
    q.add_argument("--t2")
    q.add_argument("--t3")
    return parser


def _fmt_triplet(t) -> str:
    return f"{t.seq}\t{t.t1}\t{t.t2}\t{t.t3}"


def _open_memory(cfg: CliConfig, required: bool = False) -> MemoryStore:
    mem = MemoryStore(cfg.memory_config())
    if cfg.snapshot and Path(cfg.snapshot).exists():
        mem.load(cfg.snapshot)
    elif required:
        raise FileNotFoundError(f"snapshot not found: {cfg.snapshot}")
    return mem


def _print_stats(mem: MemoryStore, out) -> None:
    s = mem.stats()
    voc = s["vocabulary"]
    lsh = s["lsh"]
    print(f"triplets: {s['triplets']}", file=out)
    print(f"vocabulary: t1={voc['t1']} t2={voc['t2']} t3={voc['t3']}", file=out)
    print(
        f"lsh: {lsh['entries']} entries, {lsh['tables']}x{lsh['bits']} bits, {lsh['buckets']} buckets, "
        f"mean occupancy {lsh['mean_bucket']:.2f}, max {lsh['max_bucket']}",
        file=out,
    )


def cmd_chat(cfg: CliConfig, args, stdin=None, out=None) -> int:
    stdin = stdin or sys.stdin
    out = out or sys.stdout
    mem = _open_memory(cfg)
    session = Session(mem, cfg.make_backend(), cfg.session_config(), log_path=args.log)
    interactive = stdin.isatty()
    while True:
        if interactive:
            print("> ", end="", file=out, flush=True)
        line = stdin.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        if text.startswith("/"):
            cmd, _, arg = text.partition(" ")
            arg = arg.strip() or cfg.snapshot
            if cmd in ("/quit", "/exit"):
                break
            if cmd == "/stats":
                _print_stats(mem, out)
            elif cmd in ("/save", "/load"):
                if not arg:
                    print("no snapshot path given", file=out)
                    continue
                try:
                    n = mem.save(arg) if cmd == "/save" else mem.load(arg)
                except (OSError, MalformedSnapshot) as exc:
                    print(f"error: {exc}", file=out)
                    continue
                print(f"{'saved' if cmd == '/save' else 'loaded'} {n} triplets", file=out)
            else:
                print("commands: /save [path], /load [path], /stats, /quit", file=out)
            continue
        try:
            turn = session.handle_input(text)
        except CallBudgetExceeded as exc:
            turn = exc.turn
            print(f"[turn aborted: {exc}]", file=out)
        if args.trace:
            print(f"[trace] {turn.raw_trace}", file=out)
            for e in turn.effects:
                print(f"[effect] {json.dumps(e.to_dict(), ensure_ascii=False)}", file=out)
        print(turn.reply, file=out, flush=True)
    return EXIT_OK


def cmd_gen(cfg: CliConfig, args, out=None) -> int:
    out = out or sys.stdout
    try:
        spec = CorpusSpec(
            seed=cfg.seed,
            population=args.population,
            reads=args.reads,
            writes=args.writes,
            group_sizes=(args.group_min, args.group_max),
            shuffle=args.shuffle,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    instances = build_corpus(spec)
    n = emit_corpus(instances, args.out)
    counts = Counter(i.type for i in instances)
    for kind in sorted(counts):
        print(f"{kind}\t{counts[kind]}", file=out)
    print(f"wrote {n} instances to {args.out}", file=out)
    return EXIT_OK


def cmd_eval(cfg: CliConfig, args, out=None) -> int:
    out = out or sys.stdout
    instances = load_corpus(args.corpus)
    if args.limit is not None:
        instances = instances[: args.limit]
    if args.validate_corpus:
        result = validate_corpus(instances, cfg.memory_config())
        print(f"validated {result['instances']} instances, {result['failed']} failed", file=out)
        for idx, problems in list(result["failures"].items())[:20]:
            print(f"  #{idx}: {'; '.join(problems)}", file=out)
        if args.report:
            Path(args.report).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        return EXIT_OK if result["failed"] == 0 else EXIT_FAILED
    backend = cfg.make_backend()
    report = evaluate(
        instances,
        cfg.memory_config(),
        backend_factory=lambda: backend,
        session_config=cfg.session_config(),
        typo_seed=cfg.seed if args.typos else None,
    )
    print(report.table(), file=out)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_mem(cfg: CliConfig, args, out=None) -> int:
    out = out or sys.stdout
    mem = _open_memory(cfg, required=True)
    if args.action == "dump":
        for t in mem.triplets():
            print(_fmt_triplet(t), file=out)
        return EXIT_OK
    result = mem.resolve(TripletQuery(args.t1, args.t2, args.t3))
    for s in result.substitutions:
        print(f"# t{s.slot}: {s.original!r} -> {s.substituted!r} (cosine {s.score:.4f})", file=out)
    for t in result.matches:
        print(_fmt_triplet(t), file=out)
    if not result.matches:
        print("# no matches", file=out)
    return EXIT_OK


_COMMANDS = {"chat": cmd_chat, "gen": cmd_gen, "eval": cmd_eval, "mem": cmd_mem}
_OVERRIDES = [name for name in _FIELDS]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k, None) for k in _OVERRIDES})
        return _COMMANDS[args.command](cfg, args)
    except (OSError, MalformedSnapshot) as exc:
        print(f"retmem: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidQueryShape, ValueError) as exc:
        print(f"retmem: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendUnavailable as exc:
        print(f"retmem: backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
