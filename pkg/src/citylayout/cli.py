"""Command-line pipeline: ingest, synth, fit, train, generate, eval, export,
serve.

Defaults come from an optional JSON config file (--config or the
CITYLAYOUT_CONFIG environment variable); explicit flags override file values.
The effective configuration is echoed at startup. Exit codes: 0 success,
1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import artifactio, ingest, metrics, synth
from .config import GRID_COLS, GRID_ROWS, HEIGHT_CAP_M, LANDUSE_CLASSES
from .errors import CityLayoutError
from .geometry import Polygon, shapely_to_polygon
from .pipeline import UrbanLayoutModel
from .shapelib import fit_shape

CONFIG_ENV = "CITYLAYOUT_CONFIG"

_CONFIG_DEFAULTS = {
    "classes": list(LANDUSE_CLASSES),
    "grid_rows": GRID_ROWS,
    "grid_cols": GRID_COLS,
    "height_cap": HEIGHT_CAP_M,
    "epochs": 250,
    "ae_epochs": 200,
    "batch_size": 16,
    "lr": 1e-3,
    "seed": 0,
}


def _load_config(path: str | None) -> dict:
    cfg = dict(_CONFIG_DEFAULTS)
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        try:
            cfg.update(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise CityLayoutError(f"cannot read config {path}: {exc}") from exc
    return cfg


def _echo_config(cfg: dict, overrides: dict) -> None:
    effective = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
    print("effective config:", json.dumps(effective, sort_keys=True))


def _stats_table(stats: ingest.DatasetStats) -> str:
    lines = [f"{'Source':<10}{'Max':>6}{'Min':>6}{'Avg':>8}{'Std':>8}{'Blocks':>8}"]
    for src, s in stats.sources.items():
        lines.append(
            f"{src or '-':<10}{s.max:>6}{s.min:>6}{s.avg:>8.1f}{s.std:>8.1f}{s.total_blocks:>8}"
        )
    lines.append("")
    lines.append(f"{'Land use':<14}{'Blocks':>8}")
    for cls, n in stats.landuse_counts.items():
        lines.append(f"{cls:<14}{n:>8}")
    return "\n".join(lines)


def _report_table(rep: metrics.MetricsReport) -> str:
    head = f"{'L-Sim':>8}{'OPR(%)':>9}{'OBR(%)':>9}{'WD(bbx)':>9}{'WD(count)':>11}"
    row = (
        f"{rep.l_sim:>8.4f}{100 * rep.opr:>9.2f}{100 * rep.obr:>9.2f}"
        f"{rep.wd_bbx:>9.4f}{rep.wd_count:>11.4f}"
    )
    return head + "\n" + row


def _load_blocks_with_landuse(path) -> list[tuple[str, Polygon, int]]:
    blocks, _sk = ingest.load_blocks(path)
    with open(path) as fh:
        lut = {
            str((f.get("properties") or {}).get("id")): int(
                (f.get("properties") or {}).get("land_use", 0)
            )
            for f in json.load(fh)["features"]
        }
    return [(bid, poly, lut.get(bid, 0)) for bid, poly in blocks]


# -- subcommand handlers -----------------------------------------------------


def _cmd_ingest(args, cfg) -> int:
    blocks, b_skip = ingest.load_blocks(args.blocks)
    buildings, h_skip = ingest.load_buildings(args.buildings)
    landuse = None
    if args.landuse:
        landuse, _ = ingest.load_landuse(args.landuse, cfg["classes"])
    records = ingest.assemble_records(blocks, buildings, landuse, source=args.source)
    items, exclusions = ingest.build_dataset(
        records,
        n_classes=len(cfg["classes"]),
        rows=cfg["grid_rows"],
        cols=cfg["grid_cols"],
        height_cap=cfg["height_cap"],
    )
    out = Path(args.out)
    ingest.save_corpus([it.record for it in items], out)
    ingest.write_exclusion_log(exclusions, out / "exclusions.log")
    print(f"loaded {len(blocks)} blocks ({b_skip} skipped), {len(buildings)} buildings ({h_skip} skipped)")
    print(f"dataset: {len(items)} blocks kept, {len(exclusions)} excluded")
    print(_stats_table(ingest.dataset_stats([it.record for it in items])))
    return 0


def _cmd_synth(args, cfg) -> int:
    records = synth.synth_corpus(args.seed if args.seed is not None else cfg["seed"], args.blocks)
    ingest.save_corpus(records, args.out)
    print(f"wrote {len(records)} synthetic blocks to {args.out}")
    print(_stats_table(ingest.dataset_stats(records)))
    return 0


def _cmd_fit(args, cfg) -> int:
    buildings, skipped = ingest.load_buildings(args.buildings)
    rows = []
    for b in buildings:
        cls, a, params = fit_shape(b.footprint)
        rows.append((b.source_id, cls.name, a, params))
    print(f"{'id':<16}{'class':<12}{'a':>8}")
    for rid, name, a, _p in rows:
        print(f"{rid:<16}{name:<12}{a:>8.4f}")
    by_class: dict[str, int] = {}
    for _rid, name, a, _p in rows:
        by_class[name] = by_class.get(name, 0) + 1
    print(f"\n{len(rows)} footprints fitted ({skipped} skipped); class counts: {by_class}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                [{"id": r, "class": c, "a": a, "params": list(p)} for r, c, a, p in rows],
                indent=2,
                sort_keys=True,
            )
        )
    return 0


def _cmd_train(args, cfg) -> int:
    records = ingest.load_corpus(args.corpus)
    model = UrbanLayoutModel(
        n_classes=len(cfg["classes"]),
        grid_rows=cfg["grid_rows"],
        grid_cols=cfg["grid_cols"],
        height_cap=cfg["height_cap"],
        ae_epochs=args.ae_epochs if args.ae_epochs is not None else cfg["ae_epochs"],
        epochs=args.epochs if args.epochs is not None else cfg["epochs"],
        lr=cfg["lr"],
        batch_size=cfg["batch_size"],
        seed=args.seed if args.seed is not None else cfg["seed"],
    )
    model.fit(records)
    model.save(args.out)
    curve = model.loss_curve_
    rep = model.reconstruction_report()
    print(f"trained on {model.n_train_blocks_} blocks for {len(curve)} epochs")
    print(f"loss: epoch1 {curve[0]:.4f} -> final {curve[-1]:.4f} (ratio {curve[-1] / curve[0]:.3f})")
    print(f"reconstruction: existence acc {rep['existence_accuracy']:.4f}, position mse {rep['position_mse']:.5f}")
    print(f"checkpoint written to {args.out}")
    return 0


def _cmd_generate(args, cfg) -> int:
    model = UrbanLayoutModel.load(args.ckpt)
    blocks = _load_blocks_with_landuse(args.blocks)
    layouts = [
        model.generate(poly, land_use, seed=args.seed, block_id=bid)
        for bid, poly, land_use in blocks
    ]
    doc = artifactio.export_geojson(layouts)
    Path(args.out).write_text(doc)
    n = sum(len(L.buildings) for L in layouts)
    print(f"generated {n} buildings across {len(layouts)} blocks -> {args.out}")
    if args.obj:
        Path(args.obj).write_text(artifactio.export_obj(layouts))
        print(f"OBJ mesh -> {args.obj}")
    return 0


def _layout_samples(
    layouts: list[artifactio.GeneratedLayout], blocks: dict[str, Polygon] | None
) -> list[metrics.LayoutSample]:
    samples = []
    for L in layouts:
        if blocks and L.block_id in blocks:
            blk = blocks[L.block_id]
        else:
            hull = None
            for b in L.buildings:
                hull = b.footprint.shapely if hull is None else hull.union(b.footprint.shapely)
            blk = shapely_to_polygon(hull.convex_hull.buffer(5.0, join_style=2))
        samples.append(metrics.LayoutSample.of(blk, [(b.footprint, b.height) for b in L.buildings]))
    return samples


def _cmd_eval(args, cfg) -> int:
    gen = artifactio.load_layouts(Path(args.gen))
    ref = artifactio.load_layouts(Path(args.ref))
    blocks = None
    if args.blocks:
        blocks = {bid: poly for bid, poly, _u in _load_blocks_with_landuse(args.blocks)}
    else:
        warnings.warn("no --blocks given; using building hulls as block stand-ins (OBR approximate)")
    ref_by_id = {L.block_id: L for L in ref}
    missing = [L.block_id for L in gen if L.block_id not in ref_by_id]
    if len(gen) != len(ref) or missing:
        raise CityLayoutError(
            f"generated and reference block sets differ ({len(gen)} vs {len(ref)}, unmatched {missing[:5]})"
        )
    ref_aligned = [ref_by_id[L.block_id] for L in gen]
    rep = metrics.evaluate(_layout_samples(gen, blocks), _layout_samples(ref_aligned, blocks))
    print(_report_table(rep))
    if args.out:
        Path(args.out).write_text(rep.to_json())
    return 0


def _cmd_export(args, cfg) -> int:
    layouts = artifactio.load_layouts(Path(args.layout))
    if args.format == "obj":
        Path(args.out).write_text(artifactio.export_obj(layouts))
    else:
        Path(args.out).write_text(artifactio.export_geojson(layouts))
    print(f"exported {sum(len(L.buildings) for L in layouts)} buildings -> {args.out}")
    return 0


def _cmd_serve(args, cfg) -> int:
    import uvicorn

    from .service import create_app

    model = UrbanLayoutModel.load(args.ckpt) if args.ckpt else None
    app = create_app(model, base_seed=args.seed if args.seed is not None else cfg["seed"])
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="citylayout", description=__doc__)
    p.add_argument("--config", help="JSON config file (or set CITYLAYOUT_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="GeoJSON blocks+buildings -> joined corpus + stats")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--buildings", required=True)
    sp.add_argument("--landuse")
    sp.add_argument("--source", default="", help="source label for the stats table")
    sp.add_argument("--out", required=True, help="output corpus directory")
    sp.set_defaults(fn=_cmd_ingest)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--blocks", type=int, default=200)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_synth)

    sp = sub.add_parser("fit", help="shape-fit report for building footprints")
    sp.add_argument("--buildings", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_fit)

    sp = sub.add_parser("train", help="train block autoencoder then layout CVAE")
    sp.add_argument("--corpus", required=True, help="corpus directory from ingest/synth")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--ae-epochs", type=int, dest="ae_epochs")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("generate", help="blocks + checkpoint -> layout GeoJSON")
    sp.add_argument("--blocks", required=True)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--obj", help="also write an OBJ mesh")
    sp.set_defaults(fn=_cmd_generate)

    sp = sub.add_parser("eval", help="compare generated vs reference layouts")
    sp.add_argument("--gen", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--blocks", help="block boundaries (recommended for OBR)")
    sp.add_argument("--out", help="write the report as JSON")
    sp.set_defaults(fn=_cmd_eval)

    sp = sub.add_parser("export", help="layout GeoJSON -> OBJ or normalized GeoJSON")
    sp.add_argument("--layout", required=True)
    sp.add_argument("--format", choices=("obj", "geojson"), default="obj")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_export)

    sp = sub.add_parser("serve", help="run the interactive what-if HTTP service")
    sp.add_argument("--ckpt", help="model checkpoint (omit to serve without a model)")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=_cmd_serve)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_DEFAULTS}
        _echo_config(cfg, overrides)
        return args.fn(args, cfg)
    except CityLayoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
