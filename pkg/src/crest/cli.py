"""Command-line front end.

    crest run <config>
    crest compare <ref_dir> <dir>...
    crest sweep <config> <param> <value>...
    crest selftest

Global flags ``--seed``, ``--out`` and ``--quiet`` may appear before or after
the subcommand. Exit codes: 0 success, 1 runtime failure, 2 usage or config
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, MissingField, load_config, trainer_field_converter, with_trainer
from .datasets import DatasetFormatError
from .experiment import run_to_dir
from .metrics_io import SCHEMAS, SchemaError, read_run, read_table, render_table
from .selftest import run_selftest

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

COMPARE_COLUMNS = (
    "run", "method", "seed", "final_loss", "final_acc", "rel_error_pct",
    "updates_total", "grad_queries_total",
)


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS, help="override trainer.seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (overrides output.dir)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="no progress output")

    p = argparse.ArgumentParser(prog="crest", parents=[common], description="Mini-batch coreset training experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run one experiment from a config file")
    r.add_argument("config")

    c = sub.add_parser("compare", parents=[common], help="compare finished runs against a reference")
    c.add_argument("ref_dir")
    c.add_argument("dirs", nargs="+")

    s = sub.add_parser("sweep", parents=[common], help="run one experiment per value of a trainer field")
    s.add_argument("config")
    s.add_argument("param")
    s.add_argument("values", nargs="+")

    t = sub.add_parser("selftest", parents=[common], help="fast property checks")
    t.add_argument("--inject-asymmetry", action="store_true", help=argparse.SUPPRESS)
    return p


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = with_trainer(cfg, seed=args.seed)
    out = getattr(args, "out", None)
    if out is not None:
        cfg = replace(cfg, output_dir=out)
    if cfg.output_dir is None:
        raise MissingField("output.dir", args.config)
    return cfg


def _check_writable(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-check"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {path} is not writable: {exc.strerror}") from None


def cmd_run(args, say) -> int:
    cfg = _load(args)
    out = Path(cfg.output_dir)
    _check_writable(out)
    m = run_to_dir(cfg, out, base=Path(args.config).resolve().parent)
    f = m.final
    say(f"{cfg.method} seed={f['seed']} final_loss={f['final_loss']:.6g} final_acc={f['final_acc']:.4f} "
        f"updates={f['updates_total']} grad_queries={f['grad_queries_total']} -> {out}")
    return EXIT_OK


def relative_error_pct(acc: float, ref: float) -> float:
    """``100 * |acc - ref| / ref``; infinite for a zero reference unless equal."""
    if ref == 0:
        return 0.0 if acc == 0 else math.inf
    return 100.0 * abs(acc - ref) / ref


def compare_rows(ref_dir, dirs) -> list[dict]:
    ref = read_run(ref_dir)["final"]
    if len(ref) != 1:
        raise SchemaError(f"{ref_dir}: final.csv must hold exactly one row")
    ref_acc = ref[0]["final_acc"]
    rows = []
    for d in dirs:
        fin = read_run(d)["final"]
        if len(fin) != 1:
            raise SchemaError(f"{d}: final.csv must hold exactly one row")
        f = fin[0]
        rows.append(dict(
            run=str(d), method=f["method"], seed=f["seed"], final_loss=f["final_loss"],
            final_acc=f["final_acc"], rel_error_pct=relative_error_pct(f["final_acc"], ref_acc),
            updates_total=f["updates_total"], grad_queries_total=f["grad_queries_total"],
        ))
    return rows


def _render(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def cmd_compare(args, say) -> int:
    rows = compare_rows(args.ref_dir, args.dirs)
    text = _render(COMPARE_COLUMNS, rows)
    out = getattr(args, "out", None)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "compare.csv").write_text(text, encoding="utf-8")
    say(f"# reference: {args.ref_dir}")
    say(text.rstrip("\n"))
    return EXIT_OK


def _sweep_param(name: str) -> str:
    field = name.split(".", 1)[1] if name.startswith("trainer.") else name
    if trainer_field_converter(field) is None or field == "seed":
        raise UsageError(f"unknown sweep parameter '{name}' (expected a trainer field other than seed)")
    return field


def cmd_sweep(args, say) -> int:
    field = _sweep_param(args.param)
    conv = trainer_field_converter(field)
    try:
        values = [conv(v) for v in args.values]
    except ValueError as exc:
        raise UsageError(f"bad value for '{field}': {exc}") from None
    cfg = _load(args)
    root = Path(cfg.output_dir)
    _check_writable(root)
    base = Path(args.config).resolve().parent
    rows = []
    for i, (text, value) in enumerate(zip(args.values, values)):
        try:
            run_cfg = with_trainer(cfg, **{field: value, "seed": cfg.trainer.seed + i})
            run_cfg.trainer.validate()
        except ValueError as exc:
            raise UsageError(f"{field} = {text}: {exc}") from None
        out = root / f"{i:02d}_{field}_{text}"
        run_cfg = replace(run_cfg, output_dir=str(out))
        m = run_to_dir(run_cfg, out, base=base)
        rows.append(dict(param=field, value=text, **m.final))
        say(f"{field}={text} seed={run_cfg.trainer.seed} final_loss={m.final['final_loss']:.6g} "
            f"final_acc={m.final['final_acc']:.4f}")
    cols = ("param", "value") + SCHEMAS["final"]
    (root / "sweep.csv").write_text(_render(cols, rows), encoding="utf-8")
    return EXIT_OK


def cmd_selftest(args, say) -> int:
    ok = run_selftest(getattr(args, "seed", None) or 0, inject_asymmetry=args.inject_asymmetry, emit=say)
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    def say(text: str) -> None:
        if not quiet:
            print(text)

    def err(text: str) -> None:
        print(f"crest {args.command}: {text}", file=sys.stderr)

    try:
        return COMMANDS[args.command](args, say)
    except (ConfigError, UsageError) as exc:
        err(str(exc))
        return EXIT_USAGE
    except (SchemaError, DatasetFormatError, OSError, ValueError, ArithmeticError) as exc:
        err(str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
