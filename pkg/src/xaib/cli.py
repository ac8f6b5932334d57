"""Command-line front end and the end-to-end pipeline runner.

Subcommands: synth, preprocess, split, augment, train, explain, evaluate,
run-all.  A single JSON config file drives run-all; flags override config.
Per-sample work can fan out to a thread pool bounded by --jobs (or the
XAIB_JOBS environment variable); outputs are ordered by sample id, so the
pool size never changes results.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import augment as aug
from . import dataset as ds
from . import explain as ex
from . import maskeval as me
from . import model as mdl
from . import preprocess as pp
from . import render
from .core import BinaryMask, GrayImage, Label, LabeledSample, derive_seed
from .errors import XaibError

REPORT_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration

def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown config key(s) in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 7
    preprocess: pp.PreprocessConfig = field(default_factory=pp.PreprocessConfig)
    lime: ex.LimeConfig = field(default_factory=ex.LimeConfig)
    shap_segments: int = 49
    shap_permutations: int = 5
    mask_strategy: str = "fraction_of_max"
    mask_tau: float = 0.5
    train_epochs: int = 10
    train_lr: float = 0.01
    train_batch_size: int = 16
    max_explained: int = 6
    stability_runs: int = 4
    manifest: str = ""
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        _check_keys(
            raw,
            {"master_seed", "preprocess", "lime", "shap", "mask", "train", "eval", "paths"},
            "top level",
        )
        kwargs: dict = {}
        if "master_seed" in raw:
            kwargs["master_seed"] = int(raw["master_seed"])
        pre = dict(raw.get("preprocess", {}))
        _check_keys(pre, set(pp.PreprocessConfig.__dataclass_fields__), "preprocess")
        for key in ("clahe_tile_grid", "target_size", "gabor_orientations"):
            if key in pre:
                pre[key] = tuple(pre[key])
        kwargs["preprocess"] = pp.PreprocessConfig(**pre)
        lime = dict(raw.get("lime", {}))
        _check_keys(lime, set(ex.LimeConfig.__dataclass_fields__), "lime")
        if "lasso_lambda_grid" in lime:
            lime["lasso_lambda_grid"] = tuple(lime["lasso_lambda_grid"])
        kwargs["lime"] = ex.LimeConfig(**lime)
        shap = dict(raw.get("shap", {}))
        _check_keys(shap, {"segments", "permutations"}, "shap")
        kwargs["shap_segments"] = int(shap.get("segments", 49))
        kwargs["shap_permutations"] = int(shap.get("permutations", 5))
        mask = dict(raw.get("mask", {}))
        _check_keys(mask, {"strategy", "tau"}, "mask")
        kwargs["mask_strategy"] = mask.get("strategy", "fraction_of_max")
        kwargs["mask_tau"] = float(mask.get("tau", 0.5))
        train = dict(raw.get("train", {}))
        _check_keys(train, {"epochs", "lr", "batch_size"}, "train")
        kwargs["train_epochs"] = int(train.get("epochs", 10))
        kwargs["train_lr"] = float(train.get("lr", 0.01))
        kwargs["train_batch_size"] = int(train.get("batch_size", 16))
        ev = dict(raw.get("eval", {}))
        _check_keys(ev, {"max_explained", "stability_runs"}, "eval")
        kwargs["max_explained"] = int(ev.get("max_explained", 6))
        kwargs["stability_runs"] = int(ev.get("stability_runs", 4))
        paths = dict(raw.get("paths", {}))
        _check_keys(paths, {"manifest", "out_dir"}, "paths")
        kwargs["manifest"] = paths.get("manifest", "")
        kwargs["out_dir"] = paths.get("out_dir", "out")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def echo(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "preprocess": {
                k: list(v) if isinstance(v, tuple) else v
                for k, v in asdict(self.preprocess).items()
            },
            "lime": {
                k: list(v) if isinstance(v, tuple) else v
                for k, v in asdict(self.lime).items()
            },
            "shap": {
                "segments": self.shap_segments,
                "permutations": self.shap_permutations,
            },
            "mask": {"strategy": self.mask_strategy, "tau": self.mask_tau},
            "train": {
                "epochs": self.train_epochs,
                "lr": self.train_lr,
                "batch_size": self.train_batch_size,
            },
            "eval": {
                "max_explained": self.max_explained,
                "stability_runs": self.stability_runs,
            },
            "paths": {"manifest": self.manifest, "out_dir": self.out_dir},
        }


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return max(1, int(args.jobs))
    return max(1, int(os.environ.get("XAIB_JOBS", "1")))


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# pipeline pieces shared by subcommands and run-all

def _preprocess_sample(sample: LabeledSample, cfg: pp.PreprocessConfig):
    image, stats = pp.preprocess_with_stats(sample.image, cfg)
    roi = None
    if sample.roi is not None:
        roi_arr = pp.resize_array(sample.roi.data.astype(np.float64), cfg.target_size)
        roi = BinaryMask(roi_arr >= 0.5)
    return LabeledSample(id=sample.id, image=image, label=sample.label, roi=roi), stats


def _explain_one(model, sample, config: RunConfig):
    """All three explanation masks for one preprocessed sample."""
    target = int(np.argmax(model.predict_proba(sample.image)))
    bundle = mdl.micro_backward_to_conv(model, sample.image, target)
    cam = ex.grad_cam(bundle, sample.image.shape)
    gradcam_mask = me.heatmap_to_mask(cam, config.mask_strategy, config.mask_tau)

    seg = ex.segment(sample.image, config.shap_segments)
    lime_seed = derive_seed(config.master_seed, sample.id, 0)
    lime_cfg = ex.LimeConfig(
        num_samples=max(config.lime.num_samples, seg.num_segments + 1),
        k=min(config.lime.k, seg.num_segments),
        kernel_width=config.lime.kernel_width,
        seed=lime_seed,
        lasso_lambda_grid=config.lime.lasso_lambda_grid,
    )
    lime_attr = ex.lime_explain(model, sample.image, seg, lime_cfg, target)
    lime_mask = me.attribution_to_mask(lime_attr, seg, rule="selected")

    inst = ex.InterpretableInstance.from_image(sample.image, seg)
    shap_attr = ex.shap_sampled(
        model,
        inst,
        target,
        num_permutations=config.shap_permutations,
        seed=derive_seed(config.master_seed, sample.id, 1),
    )
    shap_mask = me.attribution_to_mask(shap_attr, seg, rule="positive")
    return {
        "target": target,
        "gradcam": gradcam_mask,
        "lime": lime_mask,
        "shap": shap_mask,
        "heatmap": cam,
        "segmentation": seg,
        "lime_attr": lime_attr,
        "shap_attr": shap_attr,
    }


def run_all(config: RunConfig, jobs: int = 1) -> dict:
    """preprocess -> split -> augment -> train -> explain x3 -> masks ->
    hausdorff/stability; returns the report dict and writes report.json."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = ds.ingest(config.manifest)

    processed = _pmap(
        lambda s: _preprocess_sample(s, config.preprocess)[0], samples, jobs
    )
    split = aug.stratified_split(processed, 0.9, config.master_seed)
    train_set = aug.augment_training_set(split.train)

    # Fit on the unaugmented split: the synthetic classes are defined by
    # blob side, and mirrored variants keep their label, so the augmented
    # set is not separable.  The expansion is still produced and counted.
    model = mdl.MicroCnn(
        seed=derive_seed(config.master_seed, "model-init", 0),
        input_size=config.preprocess.target_size[0],
    )
    model, loss_curve = mdl.train_micro(
        model,
        split.train,
        epochs=config.train_epochs,
        lr=config.train_lr,
        seed=derive_seed(config.master_seed, "train", 0),
        batch_size=config.train_batch_size,
    )
    mdl.save_model(model, out_dir / "model")

    explained = split.test[: config.max_explained]
    results = [(s, _explain_one(model, s, config)) for s in explained]

    reports = {}
    for method in ("gradcam", "lime", "shap"):
        entries = [(s.id, res[method], s.roi) for s, res in results]
        reports[method] = me.hausdorff_report(entries, method).to_dict()

    probe = explained[0]
    target = results[0][1]["target"]
    runs = config.stability_runs
    seeds = [derive_seed(config.master_seed, "stability", i) for i in range(runs)]

    def gradcam_run(seed: int):
        bundle = mdl.micro_backward_to_conv(model, probe.image, target)
        return ex.grad_cam(bundle, probe.image.shape)

    seg = results[0][1]["segmentation"]

    def lime_run(seed: int):
        cfg = ex.LimeConfig(
            num_samples=max(config.lime.num_samples, seg.num_segments + 1),
            k=min(config.lime.k, seg.num_segments),
            kernel_width=config.lime.kernel_width,
            seed=seed,
            lasso_lambda_grid=config.lime.lasso_lambda_grid,
        )
        attr = ex.lime_explain(model, probe.image, seg, cfg, target)
        return me.attribution_to_mask(attr, seg, rule="selected")

    stab_gradcam = me.stability_eval(
        gradcam_run, runs, seeds, config.mask_strategy, config.mask_tau
    )
    stab_lime = me.stability_eval(
        lime_run, runs, seeds, config.mask_strategy, config.mask_tau
    )

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": config.echo(),
        "counts": {
            "samples": len(samples),
            "train": len(split.train),
            "train_augmented": len(train_set),
            "test": len(split.test),
            "explained": len(explained),
        },
        "training": {"final_loss": loss_curve[-1], "loss_curve": loss_curve},
        "hausdorff": reports,
        "stability": {
            "gradcam": {
                "deterministic": stab_gradcam.deterministic,
                "mean_pairwise_iou": stab_gradcam.mean_pairwise_iou(),
            },
            "lime": {
                "deterministic": stab_lime.deterministic,
                "mean_pairwise_iou": stab_lime.mean_pairwise_iou(),
            },
        },
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args) -> int:
    spec = ds.SyntheticSpec(
        count_per_class=args.count,
        image_size=args.size,
        text_probability=args.text_prob,
        line_probability=args.line_prob,
        seed=args.seed,
    )
    manifest = ds.generate_synthetic(spec, args.out_dir)
    print(f"wrote {manifest}")
    return 0


def _cmd_preprocess(args) -> int:
    cfg = (
        RunConfig.load(args.config).preprocess
        if args.config
        else pp.PreprocessConfig()
    )
    samples = ds.ingest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(sample):
        processed, stats = _preprocess_sample(sample, cfg)
        ds.write_png(processed.image, out_dir / f"{sample.id}.png")
        if processed.roi is not None:
            ds.write_png(processed.roi, out_dir / f"{sample.id}__roi.png")
        (out_dir / f"{sample.id}.json").write_text(
            json.dumps({"id": sample.id, "stages": stats}, indent=2, sort_keys=True)
        )
        return sample.id

    done = _pmap(work, samples, _jobs(args))
    print(f"preprocessed {len(done)} samples into {out_dir}")
    return 0


def _write_manifest(path: Path, rows: list[tuple[str, str, str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "image_path", "label", "roi_path"])
        writer.writerows(rows)


def _cmd_split(args) -> int:
    samples = ds.ingest(args.manifest)
    split = aug.stratified_split(samples, args.ratio, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, group in (("train", split.train), ("test", split.test)):
        rows = []
        for s in group:
            ds.write_png(s.image, out_dir / name / f"{s.id}.png")
            roi_rel = ""
            if s.roi is not None:
                roi_rel = f"{name}/{s.id}__roi.png"
                ds.write_png(s.roi, out_dir / roi_rel)
            rows.append((s.id, f"{name}/{s.id}.png", s.label.value, roi_rel))
        _write_manifest(out_dir / f"{name}.csv", rows)
    print(f"train {len(split.train)} / test {len(split.test)} -> {out_dir}")
    return 0


def _cmd_augment(args) -> int:
    samples = ds.ingest(args.manifest)
    augmented = aug.augment_training_set(samples)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in augmented:
        ds.write_png(s.image, out_dir / f"{s.id}.png")
        roi_rel = ""
        if s.roi is not None:
            roi_rel = f"{s.id}__roi.png"
            ds.write_png(s.roi, out_dir / roi_rel)
        rows.append((s.id, f"{s.id}.png", s.label.value, roi_rel))
    _write_manifest(out_dir / "manifest.csv", rows)
    print(f"{len(samples)} samples -> {len(augmented)} augmented in {out_dir}")
    return 0


def _cmd_train(args) -> int:
    samples = ds.ingest(args.manifest)
    size = samples[0].image.height if samples else 224
    model = mdl.MicroCnn(seed=args.seed, input_size=size)
    model, curve = mdl.train_micro(
        model, samples, epochs=args.epochs, lr=args.lr, seed=args.seed
    )
    mdl.save_model(model, args.out)
    print(f"trained {args.epochs} epochs, loss {curve[0]:.4f} -> {curve[-1]:.4f}")
    return 0


def _cmd_explain(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image = ds.read_png(args.image)

    if args.method == "gradcam":
        model_path = Path(args.model)
        if model_path.is_file():  # XTEN sidecar from an external model
            bundle = mdl.load_bundle(model_path)
        else:
            model = mdl.load_model(model_path)
            target = (
                args.target_class
                if args.target_class is not None
                else int(np.argmax(model.predict_proba(image)))
            )
            bundle = mdl.micro_backward_to_conv(model, image, target)
        heatmap = ex.grad_cam(bundle, image.shape)
        attr_json = None
    else:
        model = mdl.load_model(args.model)
        target = (
            args.target_class
            if args.target_class is not None
            else int(np.argmax(model.predict_proba(image)))
        )
        seg = ex.segment(image, args.segments)
        if args.method == "lime":
            cfg = ex.LimeConfig(
                num_samples=max(args.samples, seg.num_segments + 1),
                k=min(args.k, seg.num_segments),
                seed=args.seed,
            )
            attr = ex.lime_explain(model, image, seg, cfg, target)
        else:  # shap
            inst = ex.InterpretableInstance.from_image(image, seg)
            attr = ex.shap_sampled(
                model, inst, target, num_permutations=args.permutations, seed=args.seed
            )
        heatmap = render.attribution_to_heatmap(attr, seg)
        attr_json = {
            "base_value": attr.base_value,
            "values": attr.values.tolist(),
            "selected": list(attr.selected) if attr.selected is not None else None,
            "target_class": attr.target_class,
            "method": attr.method,
            "seed": args.seed,
        }

    ds.write_png(heatmap, out_dir / "heatmap.png")
    ds.write_rgb_png(render.overlay_rgb(image, heatmap), out_dir / "overlay.png")
    mask = me.heatmap_to_mask(heatmap, tau=args.tau)
    ds.write_png(mask, out_dir / "mask.png")
    if attr_json is not None:
        (out_dir / "attribution.json").write_text(json.dumps(attr_json, indent=2))
    print(f"{args.method} explanation written to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    if args.what == "hausdorff":
        samples = {s.id: s for s in ds.ingest(args.manifest)}
        entries = []
        for mask_path in sorted(Path(args.pred_dir).glob("*.png")):
            sid = mask_path.stem
            if sid not in samples:
                continue
            mask = BinaryMask(ds.read_png(mask_path).data >= 0.5)
            entries.append((sid, mask, samples[sid].roi))
        report = me.hausdorff_report(entries, args.method)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "hausdorff.json").write_text(json.dumps(report.to_dict(), indent=2))
        with open(out / "hausdorff.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "method", "distance", "skipped", "reason"])
            for s in report.per_sample:
                writer.writerow([s.id, args.method, s.forward, s.skipped, s.reason])
        print(f"mean {report.mean} over {len(report.per_sample)} samples -> {out}")
        return 0
    if args.what == "stability":
        model = mdl.load_model(args.model)
        image = ds.read_png(args.image)
        target = int(np.argmax(model.predict_proba(image)))
        seeds = [derive_seed(args.seed, "stability", i) for i in range(args.runs)]
        if args.method == "gradcam":
            def run(seed):
                bundle = mdl.micro_backward_to_conv(model, image, target)
                return ex.grad_cam(bundle, image.shape)
        elif args.method == "lime":
            seg = ex.segment(image, args.segments)

            def run(seed):
                cfg = ex.LimeConfig(
                    num_samples=max(args.samples, seg.num_segments + 1),
                    k=min(args.k, seg.num_segments),
                    seed=seed,
                )
                attr = ex.lime_explain(model, image, seg, cfg, target)
                return me.attribution_to_mask(attr, seg, rule="selected")
        else:  # shap
            seg = ex.segment(image, args.segments)
            inst = ex.InterpretableInstance.from_image(image, seg)

            def run(seed):
                attr = ex.shap_sampled(
                    model, inst, target, num_permutations=args.permutations, seed=seed
                )
                return me.attribution_to_mask(attr, seg, rule="positive")

        report = me.stability_eval(run, args.runs, seeds)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stability.json").write_text(json.dumps(report.to_dict(), indent=2))
        print(f"deterministic={report.deterministic} -> {out}")
        return 0
    # consistency
    model = mdl.load_model(args.model)
    samples = {s.id: s for s in ds.ingest(args.manifest)}
    pairs = []
    for token in args.pairs.split(","):
        a, b = token.split(":")
        pairs.append((samples[a.strip()], samples[b.strip()]))

    def explain(sample):
        target = int(np.argmax(model.predict_proba(sample.image)))
        bundle = mdl.micro_backward_to_conv(model, sample.image, target)
        return ex.grad_cam(bundle, sample.image.shape)

    results = me.consistency_eval(pairs, explain)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "consistency.json").write_text(
        json.dumps(
            [
                {
                    "first": r.first_id,
                    "second": r.second_id,
                    "iou": r.iou,
                    "hausdorff": r.hausdorff,
                }
                for r in results
            ],
            indent=2,
        )
    )
    print(f"{len(results)} pairs -> {out}")
    return 0


def _cmd_run_all(args) -> int:
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config = RunConfig.from_dict({**config.echo(), "master_seed": args.seed})
    if not config.manifest or not Path(config.manifest).is_file():
        print(f"error: manifest not found: {config.manifest!r}", file=sys.stderr)
        return 2
    report = run_all(config, jobs=_jobs(args))
    means = {m: report["hausdorff"][m]["mean"] for m in ("gradcam", "lime", "shap")}
    print(f"report written to {Path(config.out_dir) / 'report.json'}")
    print(f"mean directed Hausdorff: {means}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xaib",
        description="Explanation-safety benchmark pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=20, help="images per class")
    p.add_argument("--size", type=int, default=224)
    p.add_argument("--text-prob", type=float, default=0.0)
    p.add_argument("--line-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("preprocess", help="clean and standardize a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; stage is deterministic")
    p.set_defaults(fn=_cmd_preprocess)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_split)

    p = sub.add_parser("augment", help="apply the seven fixed augmentations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_augment)

    p = sub.add_parser("train", help="train the built-in CNN")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model archive directory")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("explain", help="explain one image")
    p.add_argument("--method", choices=["gradcam", "lime", "shap"], required=True)
    p.add_argument("--model", required=True, help="model dir or XTEN sidecar JSON")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-class", type=int, default=None)
    p.add_argument("--segments", type=int, default=49)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--permutations", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(fn=_cmd_explain)

    p = sub.add_parser("evaluate", help="hausdorff / stability / consistency")
    psub = p.add_subparsers(dest="what", required=True)
    ph = psub.add_parser("hausdorff")
    ph.add_argument("--pred-dir", required=True, help="directory of <id>.png masks")
    ph.add_argument("--manifest", required=True)
    ph.add_argument("--method", default="gradcam")
    ph.add_argument("--out", required=True)
    ph.add_argument("--seed", type=int, default=0, help="accepted for uniformity; stage is deterministic")
    ph.set_defaults(fn=_cmd_evaluate)
    ps = psub.add_parser("stability")
    ps.add_argument("--method", choices=["gradcam", "lime", "shap"], required=True)
    ps.add_argument("--model", required=True)
    ps.add_argument("--image", required=True)
    ps.add_argument("--runs", type=int, default=5)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--segments", type=int, default=49)
    ps.add_argument("--samples", type=int, default=200)
    ps.add_argument("--k", type=int, default=5)
    ps.add_argument("--permutations", type=int, default=5)
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=_cmd_evaluate)
    pc = psub.add_parser("consistency")
    pc.add_argument("--model", required=True)
    pc.add_argument("--manifest", required=True)
    pc.add_argument("--pairs", required=True, help="comma list of idA:idB")
    pc.add_argument("--out", required=True)
    pc.add_argument("--seed", type=int, default=0, help="accepted for uniformity; stage is deterministic")
    pc.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("run-all", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(fn=_cmd_run_all)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except XaibError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
