"""Command-line entry point.

Each subcommand reads/writes declared files only, prints a one-line JSON
summary on stdout and exits 0; usage errors exit 2, I/O errors 3, domain
errors 4 (machine-readable JSON on stderr).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import atr, cluster, insertion, perfmap, repair, sim
from .core import SnippetSpec, extract_snippets
from .errors import SeafloorError
from .features import feature_matrix
from .raster_io import load_image, read_raster, save_image, write_raster

EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 2, 3, 4

TRUTH_SCALE = 255.0  # truth PGM encoding: pixel = (class_id + 1) / 255


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _hash_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def _grid_meta(grid) -> dict:
    return {"origin": [grid.origin[0], grid.origin[1]],
            "cell_size": grid.cell_size,
            "width": grid.width, "height": grid.height}


# --- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sensor = sim.SensorModel(altitude=args.altitude,
                             max_slant_range=args.max_range)
    missions, manifest = sim.generate_mission_set(
        seed=args.seed, sensor=sensor, mission_length_m=args.length)
    for entry, (name, image, truth) in zip(manifest["missions"], missions):
        img_path = out / f"mission_{name}.pgm"
        save_image(image, img_path)
        truth_path = out / f"truth_{name}.pgm"
        write_raster((truth.astype(np.float64) + 1.0) / TRUTH_SCALE,
                     {"encoding": "class_id = pixel * 255 - 1"}, truth_path)
        entry["image"] = img_path.name
        entry["truth"] = truth_path.name
        entry["image_sha"] = _hash_file(img_path)
    manifest["truth_encoding"] = "class_id = pixel * 255 - 1"
    _write_json(out / "manifest.json", manifest)
    return {"command": "simulate", "out": str(out),
            "missions": len(missions),
            "manifest_sha": _hash_file(out / "manifest.json")}


def cmd_insert(args) -> dict:
    image = load_image(args.image)
    aug, records = insertion.insert_random_contacts(
        image, insertion.default_models(), args.count,
        min_separation=args.min_separation, seed=args.seed)
    save_image(aug, args.out_image)
    recs = [{"object": r.object_name, "ping": r.ping,
             "ground_range": r.ground_range, "yaw": r.yaw,
             "pass_id": r.pass_id, "e": r.geo[0], "n": r.geo[1]}
            for r in records]
    _write_json(args.records, recs)
    return {"command": "insert", "inserted": len(records),
            "image": str(args.out_image), "records": str(args.records)}


def cmd_atr_run(args) -> dict:
    image = load_image(args.image)
    config = atr.DetectorConfig.build(
        altitude=args.altitude, threshold=args.threshold,
        nms_radius=args.nms_radius,
        bin_resolution=image.bin_resolution,
        ping_resolution=image.ping_resolution)
    contacts = atr.TemplateDetector(config).detect(image)
    payload = [{"ping": c.ping, "bin": c.bin, "e": c.geo[0], "n": c.geo[1],
                "confidence": c.confidence, "class": c.label}
               for c in contacts]
    _write_json(args.out, payload)
    return {"command": "atr-run", "contacts": len(contacts),
            "out": str(args.out)}


def cmd_perfmap(args) -> dict:
    image = load_image(args.image)
    config = perfmap.MonteCarloConfig(
        n_passes=args.passes, contacts_per_pass=args.contacts,
        cell_size=args.cell_size, seed=args.seed)
    det_cfg = atr.DetectorConfig.build(
        altitude=args.altitude, threshold=args.threshold,
        bin_resolution=image.bin_resolution,
        ping_resolution=image.ping_resolution)
    detector = atr.TemplateDetector(det_cfg)
    pmap = perfmap.run_monte_carlo(image, insertion.default_models(),
                                   detector, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dense = perfmap.densify(pmap)
    write_raster(np.clip(dense.values, 0.0, 1.0), _grid_meta(dense),
                 out / "pd.pgm")
    _write_json(out / "tallies.json", {
        "grid": _grid_meta(pmap.trials),
        "successes": pmap.successes.values.tolist(),
        "trials": pmap.trials.values.tolist(),
    })
    report = {"N": pmap.n_passes, "fad_per_ha": pmap.fad,
              "false_alarms": pmap.false_alarm_count,
              "mean_pd": pmap.mean_pd(),
              "trials": int(pmap.trials.values.sum()),
              "ensonified_area_m2": pmap.ensonified_area_m2}
    _write_json(out / "report.json", report)
    return {"command": "perfmap", "out": str(out), **report}


def _load_mission_snippets(data_dir, n_per_image, seed, spec):
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    snippets, truth = [], []
    for entry in manifest["missions"]:
        image = load_image(data_dir / entry["image"])
        ss = extract_snippets(image, spec, mode="random",
                              n=n_per_image, seed=seed)
        snippets += ss
        truth += [entry["class"]] * len(ss)
    return snippets, truth


def cmd_cluster_train(args) -> dict:
    spec = SnippetSpec(side_m=args.side, stride_m=args.side)
    snippets, _ = _load_mission_snippets(args.data, args.snippets_per_image,
                                         args.seed, spec)
    model = cluster.train_clusterer(snippets, p=args.clusters,
                                    batch_size=args.batch_size,
                                    max_epochs=args.max_epochs,
                                    tolerance=args.tolerance, seed=args.seed)
    model.save(args.out)
    return {"command": "cluster-train", "P": model.p,
            "samples": model.training_log["n_samples"],
            "epochs": model.training_log["epochs"], "out": str(args.out)}


def _representative_sets(args):
    model = cluster.ClusterModel.load(args.model)
    spec = SnippetSpec(side_m=args.side, stride_m=args.side)
    snippets, _ = _load_mission_snippets(args.data, args.snippets_per_image,
                                         args.seed, spec)
    feats = feature_matrix(snippets, model.extractor)
    return model, cluster.representatives(model, snippets, k=args.k,
                                          features=feats)


def cmd_cluster_reps(args) -> dict:
    model, reps = _representative_sets(args)
    payload = [{"cluster": c, "count": int(model.counts[c]),
                "snippets": [{"source": s.source_image,
                              "origin": list(s.origin),
                              "distance": d} for s, d in members]}
               for c, members in enumerate(reps)]
    _write_json(args.out, payload)
    return {"command": "cluster-reps", "P": model.p, "out": str(args.out)}


def cmd_label_export(args) -> dict:
    model, reps = _representative_sets(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"P": model.p, "clusters": []}
    for c, members in enumerate(reps):
        entry = {"id": c, "count": int(model.counts[c]), "snippets": []}
        for j, (snippet, dist) in enumerate(members):
            fname = f"cluster{c:02d}_snippet{j:02d}.png"
            px = np.clip(snippet.pixels, 0.0, 1.0)
            PILImage.fromarray((px * 255).astype(np.uint8), mode="L") \
                .save(out / fname)
            entry["snippets"].append({"file": fname, "distance": dist})
        manifest["clusters"].append(entry)
    _write_json(out / "manifest.json", manifest)
    return {"command": "label-export", "P": model.p, "out": str(out)}


def cmd_classify(args) -> dict:
    image = load_image(args.image)
    model = cluster.ClusterModel.load(args.model)
    mapping = cluster.LabelMapping.load(args.mapping)
    spec = SnippetSpec(side_m=args.side, stride_m=args.stride)
    label_map = cluster.classify(image, model, mapping, spec)
    _write_json(args.out, {
        "grid": _grid_meta(label_map.grid),
        "values": label_map.grid.values.tolist(),
        "mapping": mapping.to_json(),
        "pass_ids": label_map.pass_ids,
    })
    return {"command": "classify", "cells": int((label_map.grid.values
                                                 != cluster.NO_CLASS).sum()),
            "out": str(args.out)}


def _load_label_map(path) -> cluster.TerrainLabelMap:
    data = json.loads(Path(path).read_text())
    from .core import GeoGrid
    g = data["grid"]
    grid = GeoGrid(origin=tuple(g["origin"]), cell_size=g["cell_size"],
                   values=np.array(data["values"], dtype=np.int16),
                   nodata=cluster.NO_CLASS)
    return cluster.TerrainLabelMap(
        grid=grid, mapping=cluster.LabelMapping.from_json(data["mapping"]),
        pass_ids=data.get("pass_ids", []))


def cmd_merge(args) -> dict:
    maps = [_load_label_map(p) for p in args.maps]
    mapping = cluster.LabelMapping.load(args.mapping)
    merged = cluster.merge_maps(maps, mapping, policy=args.policy)
    _write_json(args.out, {
        "grid": _grid_meta(merged.grid),
        "values": merged.grid.values.tolist(),
        "mapping": mapping.to_json(),
        "pass_ids": merged.pass_ids,
        "merge_policy": merged.merge_policy,
    })
    return {"command": "merge", "policy": args.policy, "out": str(args.out)}


def cmd_evaluate(args) -> dict:
    model = cluster.ClusterModel.load(args.model)
    spec = SnippetSpec(side_m=args.side, stride_m=args.side)
    snippets, truth = _load_mission_snippets(args.data,
                                             args.snippets_per_image,
                                             args.seed, spec)
    feats = feature_matrix(snippets, model.extractor)
    assign = model.assign(feats)
    precision, confusion, majority = cluster.evaluate_precision(
        assign, np.array(truth))
    classes = sorted(set(truth))
    _write_json(args.out, {
        "precision": precision,
        "classes": classes,
        "confusion": confusion.tolist(),
        "cluster_majority": {str(k): classes[v] for k, v in majority.items()},
        "samples": len(truth),
    })
    return {"command": "evaluate", "precision": precision,
            "samples": len(truth), "out": str(args.out)}


def cmd_repair_plan(args) -> dict:
    matrix, meta = read_raster(args.pd)
    from .core import GeoGrid
    grid = GeoGrid(origin=tuple(meta["origin"]), cell_size=meta["cell_size"],
                   values=matrix)
    flagged = repair.flag_cells(grid, args.cell_size, args.threshold)
    plan = repair.plan_revisit(flagged, args.heading,
                               (args.start[0], args.start[1]),
                               orthogonal=not args.same_heading,
                               source_map_id=Path(args.pd).name,
                               threshold=args.threshold)
    plan.save(args.out)
    return {"command": "repair-plan", "legs": len(plan.legs),
            "flagged_cells": int(flagged.values.sum()),
            "total_transit_m": plan.total_transit_m, "out": str(args.out)}


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seafloorkit",
        description="Sidescan terrain characterisation and mission repair")
    ap.add_argument("--jobs", type=int,
                    default=int(os.environ.get("SEAFLOOR_JOBS", "0")),
                    help="worker cap (0 = auto); accepted for compatibility")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the 6-archetype mission set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=float, default=60.0)
    p.add_argument("--altitude", type=float, default=10.0)
    p.add_argument("--max-range", type=float, default=40.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("insert", help="insert random synthetic contacts")
    p.add_argument("--image", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--min-separation", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-image", required=True)
    p.add_argument("--records", required=True)
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("atr-run", help="run the reference detector")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--altitude", type=float, default=10.0)
    p.add_argument("--threshold", type=float, default=0.4)
    p.add_argument("--nms-radius", type=float, default=5.0)
    p.set_defaults(func=cmd_atr_run)

    p = sub.add_parser("perfmap", help="Monte-Carlo PD map + FAD")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--passes", type=int, default=10)
    p.add_argument("--contacts", type=int, default=10)
    p.add_argument("--cell-size", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--altitude", type=float, default=10.0)
    p.add_argument("--threshold", type=float, default=0.4)
    p.set_defaults(func=cmd_perfmap)

    p = sub.add_parser("cluster-train", help="train the online K-means model")
    p.add_argument("--data", required=True, help="simulate output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=20)
    p.add_argument("--snippets-per-image", type=int, default=400)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--side", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster_train)

    for name, fn in (("cluster-reps", cmd_cluster_reps),
                     ("label-export", cmd_label_export)):
        p = sub.add_parser(name, help="representative snippets per cluster")
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--k", type=int, default=9)
        p.add_argument("--snippets-per-image", type=int, default=400)
        p.add_argument("--side", type=float, default=3.0)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=fn)

    p = sub.add_parser("classify", help="label map from model + mapping")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--side", type=float, default=3.0)
    p.add_argument("--stride", type=float, default=3.0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("merge", help="merge label maps from multiple passes")
    p.add_argument("--maps", nargs="+", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--policy", choices=["max_votes", "max_complexity"],
                   default="max_votes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("evaluate", help="cluster-majority precision on truth")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snippets-per-image", type=int, default=400)
    p.add_argument("--side", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("repair-plan", help="revisit plan over low-PD cells")
    p.add_argument("--pd", required=True, help="PD raster (PGM + meta)")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--cell-size", type=float, default=20.0)
    p.add_argument("--heading", type=float, default=0.0)
    p.add_argument("--start", type=float, nargs=2, default=(0.0, 0.0))
    p.add_argument("--same-heading", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repair_plan)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except SeafloorError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_IO
    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
