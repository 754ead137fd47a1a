"""Command-line pipeline: gen-data, preprocess, train, eval, extract-fill, stats.

Every subcommand is deterministic given its config and seed. Exit codes:
0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import RunConfig
from .errors import ConfigError, DataError, MeshError, NoFillingError, NumericalError
from .filling import extract_filling
from .losses import vertex_distance
from .mesh import fill_holes, is_watertight, keep_largest_component
from .meshio import load_mesh_path, save_mesh, save_mesh_path
from .scars import load_manifest, make_dataset
from .train import evaluate, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that for data errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(pairs: list[tuple[str, str, object]]) -> dict:
    out: dict = {}
    for section, key, value in pairs:
        if value is not None:
            out.setdefault(section, {})[key] = value
    return out


def cmd_gen_data(args) -> int:
    cfg = RunConfig.load(args.config, _overrides([
        ("dataset", "count", args.count),
        ("dataset", "scars_per_mesh", args.scars),
        ("dataset", "seed", args.seed),
        ("dataset", "split_ratios", args.ratios),
        ("dataset", "subdivisions", args.subdivisions),
    ]))
    out = cfg.resolve_path("out_dir", args.out, "--out")
    ds = cfg.dataset
    manifest = make_dataset(
        out,
        count=ds["count"],
        scars_per_mesh=ds["scars_per_mesh"],
        seed=ds["seed"],
        split_ratios=tuple(ds["split_ratios"]),
        subdivisions=ds["subdivisions"],
        ranges=cfg.scar_ranges(),
    )
    n_files = ds["count"] * (ds["scars_per_mesh"] + 1)
    print(f"wrote {n_files} mesh files and manifest.json to {out}")
    print(f"manifest entries: {len(manifest.entries)}")
    for split in ("train", "val", "test"):
        heads = {e.head for e in manifest.split_entries(split)}
        print(f"  {split}: {len(heads)} heads, {len(manifest.split_entries(split))} pairs")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for src in args.inputs:
        src = Path(src)
        mesh = load_mesh_path(src)
        before = is_watertight(mesh)
        cleaned, _ = keep_largest_component(mesh)
        cleaned = fill_holes(cleaned)
        after = is_watertight(cleaned)
        unchanged = (
            cleaned.n_vertices == mesh.n_vertices and cleaned.n_faces == mesh.n_faces
        )
        dst = out / src.name
        save_mesh_path(cleaned, dst)
        state = "no-op" if unchanged else "repaired"
        print(f"{src.name}: watertight {before} -> {after} ({state})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config, _overrides([
        ("training", "lr", args.lr),
        ("training", "epochs", args.epochs),
        ("training", "batch_size", args.batch),
        ("training", "max_steps", args.max_steps),
        ("training", "seed", args.seed),
        ("training", "loss_target", args.loss_target),
        ("training", "loss_metric", args.loss_metric),
        ("architecture", "ratios", args.arch_ratios),
        ("architecture", "widths", args.widths),
        ("architecture", "activation", args.activation),
    ]))
    data = cfg.resolve_path("data_dir", args.data, "--data")
    out = cfg.resolve_path("out_dir", args.out, "--out")
    manifest = load_manifest(Path(data) / "manifest.json")
    result = train(manifest, data, cfg.model_architecture(), cfg.train_settings(), out)
    print(f"trained {result.steps} steps; best loss {result.best_loss!r}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(Path(args.data) / "manifest.json")
    model = None
    if not args.identity:
        if args.checkpoint is None:
            raise ConfigError("eval needs --checkpoint or --identity")
        model, _ = load_checkpoint(args.checkpoint)
    report = evaluate(model, manifest, args.data, args.split,
                      out_dir=args.out if args.write_meshes else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"eval_{args.split}.json"
    report_path.write_text(report.to_json())
    print(f"split {args.split}: {len(report.per_mesh)} meshes")
    print(f"  min vertex distance:  {report.min_vertex_distance:.6g}")
    print(f"  max vertex distance:  {report.max_vertex_distance:.6g}")
    print(f"  mean vertex distance: {report.mean_vertex_distance:.6g}")
    print(f"  min of mesh means:    {report.min_mesh_mean:.6g}")
    print(f"  max of mesh means:    {report.max_mesh_mean:.6g}")
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_extract_fill(args) -> int:
    cfg = RunConfig.load(args.config, _overrides([("extraction", "k_sigma", args.k_sigma)]))
    input_mesh = load_mesh_path(args.input)
    output_mesh = load_mesh_path(args.output)
    report = extract_filling(input_mesh, output_mesh, cfg.extraction["k_sigma"])
    out = Path(cfg.resolve_path("out_dir", args.out, "--out"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "fill_report.json").write_text(report.to_json())
    save_mesh_path(report.filling, out / "filling.ply")
    if report.watertight:
        (out / "filling.stl").write_bytes(save_mesh(report.filling, "stl"))
    for note in report.notes:
        print(f"note: {note}")
    print(f"|D| = {len(report.distances)}")
    print(f"mean = {report.mean:.6g}")
    print(f"std = {report.std:.6g}")
    print(f"outliers = {len(report.outliers)}")
    print(f"watertight = {report.watertight}")
    return EXIT_OK


def cmd_stats(args) -> int:
    a = load_mesh_path(args.a)
    b = load_mesh_path(args.b)
    d = vertex_distance(a, b)
    print(f"vertices = {len(d)}")
    print(f"min vertex distance = {d.min():.6g}")
    print(f"max vertex distance = {d.max():.6g}")
    print(f"mean vertex distance = {d.mean():.6g}")
    mu = d.mean()
    sigma = (((d - mu) ** 2).mean()) ** 0.5
    print(f"std = {sigma:.6g}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="woundfill", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap for parallel sections (modules are "
                             "order-independent, so results do not change)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize heads, scars and the manifest")
    p.add_argument("--out", help="output directory (or paths.out_dir in the config)")
    p.add_argument("--config")
    p.add_argument("--count", type=int)
    p.add_argument("--scars", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--subdivisions", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("preprocess", help="keep largest component and fill holes")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the autoencoder on a dataset")
    p.add_argument("--data", help="directory with manifest.json and meshes")
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--loss-target", choices=["ground_truth", "input"], dest="loss_target")
    p.add_argument("--loss-metric", choices=["l2", "l1"], dest="loss_metric")
    p.add_argument("--arch-ratios", type=float, nargs="+", dest="arch_ratios")
    p.add_argument("--widths", type=int, nargs="+")
    p.add_argument("--activation", choices=["elu", "relu"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--identity", action="store_true",
                   help="evaluate output=input instead of a checkpoint")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--write-meshes", action="store_true",
                   help="write per-mesh reconstructions with an 'error' channel")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("extract-fill", help="extract the wound filling from a mesh pair")
    p.add_argument("--input", required=True, help="wounded mesh")
    p.add_argument("--output", required=True, help="reconstructed mesh")
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--k-sigma", type=float, dest="k_sigma")
    p.set_defaults(func=cmd_extract_fill)

    p = sub.add_parser("stats", help="distance statistics between two meshes")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshError, DataError, NoFillingError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
