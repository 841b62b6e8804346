"""Command-line entry point: ``dnnbench {list,run,bench,gen-weights,validate}``.

Exit codes: 0 success, 2 configuration error, 3 weight or I/O error,
4 input error, 5 internal shape inconsistency.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import parallel
from .errors import (ConfigError, GraphError, InputError, PersistenceError, ReportError, ShapeError,
                     WeightError)
from .graph import argmax_class, graph_to_dict, run_inference, validate_shapes
from .inputs import InputSpec, infer_kind, load_input, parse_mean, parse_prices
from .networks import CNNS, NETWORKS, RNNS, build_network, canonical_id
from .profiler import breakdown_by_layer_type, emit_report, footprint, profile_run
from .weights import count_parameters, generate_synthetic, load_store, write_store

EXIT_OK, EXIT_CONFIG, EXIT_WEIGHTS, EXIT_INPUT, EXIT_SHAPE = 0, 2, 3, 4, 5
DEFAULT_SEED = 42
OUT_ENV = "TANGO_OUT_DIR"
FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    network: str
    seed: int = None
    weights: str = None
    input: str = None
    prices: tuple = ()
    mean: tuple = ()
    input_seed: int = None
    out: str = None
    formats: tuple = ("csv",)
    repeats: int = 5
    workers: int = 1
    precision: int = 6
    stable: bool = False
    plots: bool = True
    extra: dict = field(default_factory=dict)

    def validate(self):
        try:
            self.network = canonical_id(self.network)
        except KeyError as e:
            raise ConfigError(e.args[0]) from None
        if self.seed is not None and self.weights is not None:
            raise ConfigError("give either --seed or --weights, not both")
        if self.seed is None and self.weights is None:
            self.seed = DEFAULT_SEED
        if self.repeats < 1:
            raise ConfigError("--repeats must be >= 1")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if self.precision < 0:
            raise ConfigError("--precision must be >= 0")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise ConfigError(f"--format must be csv, json or csv,json (got {','.join(self.formats)})")
        if self.input and self.prices:
            raise ConfigError("give either --input or --prices, not both")
        if self.prices and self.network not in RNNS:
            raise ConfigError(f"--prices applies to {'/'.join(RNNS)} only")
        return self

    def input_spec(self):
        if self.prices:
            return InputSpec("price_pair", values=tuple(self.prices))
        if self.input:
            return InputSpec(infer_kind(self.input), path=self.input, mean=tuple(self.mean))
        seed = self.seed if self.input_seed is None else self.input_seed
        return InputSpec("generated", mean=tuple(self.mean), seed=seed or 0)

    def out_dir(self):
        return Path(self.out or os.environ.get(OUT_ENV) or "dnnbench_out")


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

def _common(p, need_network=True):
    p.add_argument("--network", "-n", required=False, default=None,
                   help=f"one of {', '.join(NETWORKS)}" + ("" if need_network else " (default: all)"))
    p.add_argument("--workers", type=int, default=None, help="worker threads for layer kernels")


def _run_options(p):
    p.add_argument("--seed", type=int, default=None, help=f"synthetic weight seed (default {DEFAULT_SEED})")
    p.add_argument("--weights", default=None, metavar="DIR", help="load weights from a store directory")
    p.add_argument("--input", default=None, metavar="PATH", help="P6 .ppm image or raw little-endian float32")
    p.add_argument("--prices", default=None, metavar="A,B", help="two scaled prices (LSTM/GRU)")
    p.add_argument("--mean", default=None, metavar="M1,M2,...", help="per-channel means to subtract")
    p.add_argument("--input-seed", type=int, default=None, help="seed for the generated input")
    p.add_argument("--json-config", default=None, metavar="FILE", help="RunConfig JSON; flags override it")
    p.add_argument("--out", default=None, metavar="DIR", help=f"output directory (default ${OUT_ENV})")


def build_parser():
    parser = argparse.ArgumentParser(prog="dnnbench", description="DNN inference benchmark suite")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list networks with shapes and parameter totals")

    p = sub.add_parser("run", help="run one inference and print the prediction")
    _common(p)
    _run_options(p)
    p.add_argument("--precision", type=int, default=None, help="digits for printed forecasts")
    p.add_argument("--dump-output", action="store_true", help="write the full output vector to --out")

    p = sub.add_parser("bench", help="profile a network and write breakdown/footprint reports")
    _common(p)
    _run_options(p)
    p.add_argument("--format", default=None, help="csv, json or csv,json")
    p.add_argument("--repeats", type=int, default=None, help="timing repetitions (best-of)")
    p.add_argument("--stable", action="store_true", help="omit wall times and run metadata from reports")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p = sub.add_parser("gen-weights", help="write a synthetic weight store")
    p.add_argument("--network", "-n", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("validate", help="propagate shapes and print the trace")
    _common(p, need_network=False)
    p.add_argument("--format", default=None, help="also write the trace as csv/json to --out")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--topology", default=None, metavar="FILE", help="write the layer graph as JSON")
    return parser


def _split(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def config_from_args(args) -> RunConfig:
    doc = {}
    if getattr(args, "json_config", None):
        try:
            doc = json.loads(Path(args.json_config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read --json-config {args.json_config}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("--json-config must hold a JSON object")
        known = set(RunConfig.__dataclass_fields__) - {"extra"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown --json-config keys: {', '.join(sorted(unknown))}")

    def pick(name, default=None):
        v = getattr(args, name, None)
        return doc.get(name, default) if v is None else v

    network = pick("network")
    if network is None:
        raise ConfigError("--network is required")
    fmt = pick("format") or doc.get("formats") or "csv"
    prices = pick("prices")
    mean = pick("mean")
    try:
        cfg = RunConfig(
            network=network,
            seed=pick("seed"),
            weights=pick("weights"),
            input=pick("input"),
            prices=parse_prices(prices) if isinstance(prices, str) else tuple(prices or ()),
            mean=parse_mean(mean) if isinstance(mean, str) else tuple(mean or ()),
            input_seed=pick("input_seed"),
            out=pick("out"),
            formats=_split(fmt) if isinstance(fmt, str) else tuple(fmt),
            repeats=int(pick("repeats", 5)),
            workers=int(pick("workers", 1)),
            precision=int(pick("precision", 6)),
            stable=bool(getattr(args, "stable", False) or doc.get("stable", False)),
            plots=not getattr(args, "no_plots", False) and doc.get("plots", True),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise ConfigError(f"bad configuration value: {e}") from e
    return cfg.validate()


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _load_weights(cfg, g):
    if cfg.weights is not None:
        return load_store(cfg.weights, g)
    return generate_synthetic(g, cfg.seed)


def _fmt_shape(shape):
    return "x".join(str(d) for d in shape)


def cmd_list(args, out):
    rows = []
    for net in NETWORKS:
        g = build_network(net)
        rows.append((net, str(len(g.nodes)), _fmt_shape(g.input_shape), str(g.output_len),
                     str(count_parameters(g).total)))
    header = ("network", "layers", "input", "outputs", "parameters")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))),
              file=out)
    return EXIT_OK


def cmd_run(args, out):
    cfg = config_from_args(args)
    g = build_network(cfg.network)
    store = _load_weights(cfg, g)
    x = load_input(cfg.input_spec(), g.input_shape)
    with parallel.workers(cfg.workers):
        y, _ = run_inference(g, store, x)
    if cfg.network in CNNS:
        print(f"{cfg.network}: class {argmax_class(y)} (p={float(y.max()):.{cfg.precision}g})", file=out)
    else:
        print(f"{cfg.network}: forecast {float(y[0]):.{cfg.precision}f}", file=out)
    if args.dump_output:
        d = cfg.out_dir()
        try:
            d.mkdir(parents=True, exist_ok=True)
            path = d / f"{cfg.network.lower()}_output.json"
            path.write_text(json.dumps({"network": cfg.network, "output": [float(v) for v in y]}) + "\n",
                            encoding="utf-8")
        except OSError as e:
            raise PersistenceError(f"cannot write output vector: {e}") from e
        print(f"wrote {path}", file=out)
    return EXIT_OK


def _write(path, data: bytes):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise PersistenceError(f"cannot write {path}: {e}") from e
    return path


def cmd_bench(args, out):
    cfg = config_from_args(args)
    g = build_network(cfg.network)
    store = _load_weights(cfg, g)
    spec = cfg.input_spec()
    x = load_input(spec, g.input_shape)
    with parallel.workers(cfg.workers):
        records = profile_run(g, store, x, cfg.repeats)
    meta = {"network": cfg.network, "seed": cfg.seed, "weights": cfg.weights, "input": spec.describe(),
            "repeats": cfg.repeats}
    if not cfg.stable:
        meta["workers"] = cfg.workers
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    report = breakdown_by_layer_type(records, cfg.network, meta)
    fp = footprint(g)

    d = cfg.out_dir()
    stem = cfg.network.lower()
    written = []
    for fmt in cfg.formats:
        written.append(_write(d / f"{stem}_breakdown.{fmt}", emit_report(report, fmt, cfg.stable)))
        written.append(_write(d / f"{stem}_footprint.{fmt}", emit_report(fp, fmt, cfg.stable)))
        written.append(_write(d / f"{stem}_layers.{fmt}", emit_report(records, fmt, cfg.stable)))
    if cfg.plots:
        from . import plotting

        written.append(plotting.plot_layer_shares(report, d / f"{stem}_breakdown.png"))
        written.append(plotting.plot_op_mix(report, d / f"{stem}_opmix.png"))
        written.append(plotting.plot_footprints([fp], d / f"{stem}_footprint.png"))

    print(f"{'layer_type':<14}{'time_share':>12}{'op_share':>12}", file=out)
    for r in report.rows:
        print(f"{r.layer_type:<14}{r.time_share:>12.4f}{r.op_share:>12.4f}", file=out)
    print(f"footprint: weights {fp.weight_bytes} B, peak activations {fp.peak_activation_bytes} B, "
          f"total {fp.total_bytes} B", file=out)
    for p in written:
        print(f"wrote {p}", file=out)
    return EXIT_OK


def cmd_gen_weights(args, out):
    try:
        g = build_network(args.network)
    except KeyError as e:
        raise ConfigError(e.args[0]) from None
    manifest = write_store(generate_synthetic(g, args.seed), args.out)
    total = sum(e.bytes for e in manifest.layers)
    print(f"wrote {len(manifest.layers)} layer files ({total} bytes) to {args.out}", file=out)
    return EXIT_OK


def cmd_validate(args, out):
    try:
        nets = [canonical_id(args.network)] if args.network else list(NETWORKS)
    except KeyError as e:
        raise ConfigError(e.args[0]) from None
    if args.topology and len(nets) != 1:
        raise ConfigError("--topology needs a single --network")
    fmts = _split(args.format) if args.format else ()
    if any(f not in FORMATS for f in fmts):
        raise ConfigError("--format must be csv, json or csv,json")
    for net in nets:
        g = build_network(net)
        trace = validate_shapes(g)
        print(f"# {net}", file=out)
        for e in trace:
            ins = ";".join(_fmt_shape(s) for s in e.inputs)
            print(f"{e.layer} {e.kind} {ins} -> {_fmt_shape(e.output)}", file=out)
        for fmt in fmts:
            d = Path(args.out or os.environ.get(OUT_ENV) or "dnnbench_out")
            print(f"wrote {_write(d / f'{net.lower()}_trace.{fmt}', emit_report(trace, fmt))}", file=out)
        if args.topology:
            _write(Path(args.topology), (json.dumps(graph_to_dict(g), indent=2) + "\n").encode("utf-8"))
    return EXIT_OK


COMMANDS = {"list": cmd_list, "run": cmd_run, "bench": cmd_bench, "gen-weights": cmd_gen_weights,
            "validate": cmd_validate}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse reports usage errors with exit status 2
        return int(e.code or 0)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate" and args.workers:
            parallel.set_workers(args.workers)
        return COMMANDS[args.command](args, out)
    except ConfigError as e:
        code, msg = EXIT_CONFIG, f"config error: {e}"
    except (WeightError, PersistenceError) as e:
        code, msg = EXIT_WEIGHTS, f"weight error: {e}"
    except ReportError as e:
        code, msg = EXIT_WEIGHTS, f"report error: {e}"
    except InputError as e:
        code, msg = EXIT_INPUT, f"input error: {e}"
    except (ShapeError, GraphError) as e:
        code, msg = EXIT_SHAPE, f"shape error: {e}"
    print(msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
