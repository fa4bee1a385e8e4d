"""Command-line interface.

Subcommands: extract, apply, transfer, combine, train-extractor, train-gan,
eval, synth, serve. `transfer` is implemented by calling the extract step and
the apply step back to back through an intermediate mask file, so the two
routes produce byte-identical outputs by construction.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data as data_mod
from . import evaluation, pipeline
from .extractor import (
    ExtractorConfig,
    extractor_input,
    load_extractor,
    save_extractor,
    train_extractor,
)
from .gan import (
    DiscriminatorConfig,
    GeneratorConfig,
    TrainingConfig,
    load_generator,
    prepare_pair,
    save_discriminator,
    save_generator,
    train_application,
)
from .geometry import load_landmarks
from .imaging import (
    REGION_NAMES,
    RegionSelection,
    load_image,
    load_mask,
    mask_combine,
    save_image,
    save_mask,
)


def _landmarks_for(image_path, explicit):
    """Landmark file: the explicit flag, else the sibling convention."""
    if explicit:
        return load_landmarks(explicit)
    stem, _ = os.path.splitext(image_path)
    sibling = stem + ".landmarks.json"
    if os.path.exists(sibling):
        return load_landmarks(sibling)
    raise FileNotFoundError(
        f"no landmarks for {image_path}; pass --landmarks or provide {sibling}"
    )


def _extract_params(args) -> dict:
    return {
        "percentile": args.percentile,
        "hue_band": args.hue_band,
        "sat_band": args.sat_band,
        "residual_threshold": args.residual_threshold,
        "residual_sigma": args.residual_sigma,
        "gmm_components": args.gmm_components,
        "seed": args.seed,
    }


def _add_extract_params(p):
    p.add_argument("--percentile", type=float, default=10.0, help="gmm outlier percentile")
    p.add_argument("--hue-band", type=float, default=30.0, help="chroma hue band, degrees")
    p.add_argument("--sat-band", type=float, default=0.25, help="chroma saturation band")
    p.add_argument("--residual-threshold", type=float, default=0.12)
    p.add_argument("--residual-sigma", type=float, default=3.0)
    p.add_argument("--gmm-components", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)


def do_extract(image, out_mask, method="bagnet", model_path=None, landmarks=None,
               target=None, target_landmarks=None, params=None) -> None:
    """Write a mask for `image`. With --target set, the image is first warped
    onto the target geometry and the mask comes out in target coordinates."""
    params = params or {}
    model = load_extractor(model_path) if model_path else None
    img = load_image(image)
    lms = _landmarks_for(image, landmarks)
    if target is not None:
        tgt = load_image(target)
        t_lms = _landmarks_for(target, target_landmarks)
        wref, _ = pipeline.warp_reference(tgt.shape, t_lms, img, lms)
        mask = pipeline.extract_stage(method, wref, t_lms, model=model, **params)
    else:
        mask = pipeline.extract_stage(method, img, lms, model=model, **params)
    save_mask(mask, out_mask)


def do_apply(target, reference, out, mask_path=None, generator_path=None, bypass=False,
             target_landmarks=None, reference_landmarks=None,
             method="bagnet", model_path=None, params=None) -> None:
    """Composite the warped reference over the target through a mask file
    (or a freshly extracted mask when none is given), then refine with the
    generator unless bypassed."""
    params = params or {}
    tgt = load_image(target)
    ref = load_image(reference)
    t_lms = _landmarks_for(target, target_landmarks)
    r_lms = _landmarks_for(reference, reference_landmarks)
    wref, _ = pipeline.warp_reference(tgt.shape, t_lms, ref, r_lms)
    if mask_path is not None:
        mask = load_mask(mask_path)
        if mask.shape != tgt.shape[:2]:
            raise ValueError("mask dims do not match target")
    else:
        model = load_extractor(model_path) if model_path else None
        mask = pipeline.extract_stage(method, wref, t_lms, model=model, **params)
    generator = None
    if generator_path and not bypass:
        generator = load_generator(generator_path)
    result = pipeline.apply_stage(tgt, wref, mask, generator=generator)
    save_image(result, out)


def cmd_extract(args) -> int:
    do_extract(
        args.image, args.out_mask, method=args.method, model_path=args.model,
        landmarks=args.landmarks, target=args.target,
        target_landmarks=args.target_landmarks, params=_extract_params(args),
    )
    print(f"wrote {args.out_mask}")
    return 0


def cmd_apply(args) -> int:
    do_apply(
        args.target, args.reference, args.out, mask_path=args.mask,
        generator_path=args.generator, bypass=args.bypass,
        target_landmarks=args.target_landmarks,
        reference_landmarks=args.reference_landmarks,
        method=args.method, model_path=args.model, params=_extract_params(args),
    )
    print(f"wrote {args.out}")
    return 0


def cmd_transfer(args) -> int:
    mask_path = args.keep_mask or (os.path.splitext(args.out)[0] + ".mask.png")
    do_extract(
        args.reference, mask_path, method=args.method, model_path=args.extractor,
        landmarks=args.reference_landmarks, target=args.target,
        target_landmarks=args.target_landmarks, params=_extract_params(args),
    )
    do_apply(
        args.target, args.reference, args.out, mask_path=mask_path,
        generator_path=args.generator, bypass=args.bypass,
        target_landmarks=args.target_landmarks,
        reference_landmarks=args.reference_landmarks,
    )
    if not args.keep_mask:
        os.remove(mask_path)
    print(f"wrote {args.out}")
    return 0


def cmd_combine(args) -> int:
    if len(args.mask) != len(args.regions):
        raise ValueError("each --mask needs a matching --regions")
    masks = [load_mask(p) for p in args.mask]
    h, w = masks[0].shape
    selections = []
    need_regions = False
    for spec in args.regions:
        tokens = [t.strip() for t in spec.split(",") if t.strip()]
        if tokens == ["all"]:
            selections.append(RegionSelection(regions=frozenset(), freehand=np.ones((h, w), dtype=bool)))
            continue
        bad = [t for t in tokens if t not in REGION_NAMES]
        if bad:
            raise ValueError(f"unknown regions {bad}; choose from {REGION_NAMES} or 'all'")
        need_regions = True
        selections.append(RegionSelection.of(*tokens))
    region_map = {name: np.zeros((h, w), dtype=np.float32) for name in REGION_NAMES}
    if need_regions:
        if not args.landmarks:
            raise ValueError("region names require --landmarks for the target face")
        from .geometry import region_encoding

        region_map = region_encoding(load_landmarks(args.landmarks), h, w)
    combined = mask_combine((m, s, region_map) for m, s in zip(masks, selections))
    save_mask(combined, args.out)
    print(f"wrote {args.out}")
    return 0


def _dataset_from_manifest(manifest_path):
    entries = data_mod.load_manifest(manifest_path)
    root = data_mod.manifest_root(manifest_path)
    records = []
    for e in entries:
        if e.landmarks is None:
            raise ValueError(f"manifest entry {e.image} lacks landmarks")
        img = load_image(os.path.join(root, e.image))
        lms = load_landmarks(os.path.join(root, e.landmarks))
        records.append((extractor_input(img, lms), e.label))
    return entries, root, records


def cmd_train_extractor(args) -> int:
    cfg_kwargs = {}
    if args.config:
        with open(args.config) as f:
            cfg_kwargs = json.load(f)
        for key in ("stage_widths", "stage_kernels", "blocks_per_stage"):
            if key in cfg_kwargs:
                cfg_kwargs[key] = tuple(cfg_kwargs[key])
    cfg = ExtractorConfig(seed=args.seed, **cfg_kwargs)
    _, _, records = _dataset_from_manifest(args.manifest)
    model, history = train_extractor(
        records, cfg, epochs=args.epochs, batch_size=args.batch_size,
        lr=args.lr, flip_prob=args.flip_prob, seed=args.seed, out_dir=args.out_dir,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    out_path = os.path.join(args.out_dir, "extractor.pt")
    save_extractor(model, out_path)
    last = history[-1] if history else {"loss": float("nan"), "accuracy": float("nan")}
    print(f"wrote {out_path} (final loss {last['loss']:.4f}, accuracy {last['accuracy']:.3f})")
    return 0


def _pairs_from_manifest(manifest_path, extractor_model, max_pairs):
    entries = data_mod.load_manifest(manifest_path)
    root = data_mod.manifest_root(manifest_path)
    targets = [e for e in entries if e.label == 0]
    refs = [e for e in entries if e.label == 1]
    if not targets or not refs:
        raise ValueError("manifest needs both makeup and no-makeup entries")
    pairs = []
    for i in range(min(max_pairs, max(len(targets), len(refs)))):
        t = targets[i % len(targets)]
        r = refs[i % len(refs)]
        if t.landmarks is None or r.landmarks is None:
            raise ValueError("gan training entries need landmarks")
        pairs.append(
            prepare_pair(
                load_image(os.path.join(root, t.image)),
                load_landmarks(os.path.join(root, t.landmarks)),
                load_image(os.path.join(root, r.image)),
                load_landmarks(os.path.join(root, r.landmarks)),
                extractor_model,
            )
        )
    return pairs


def cmd_train_gan(args) -> int:
    cfgs = {"generator": {}, "discriminator": {}, "training": {}}
    if args.config:
        with open(args.config) as f:
            cfgs.update(json.load(f))
    gen_cfg = GeneratorConfig(seed=args.seed, **cfgs["generator"])
    disc_cfg = DiscriminatorConfig(seed=args.seed, **cfgs["discriminator"])
    train_kwargs = dict(cfgs["training"])
    if "betas" in train_kwargs:
        train_kwargs["betas"] = tuple(train_kwargs["betas"])
    train_cfg = TrainingConfig(epochs=args.epochs, batch_size=args.batch_size,
                               seed=args.seed, **train_kwargs)
    extractor_model = load_extractor(args.extractor)
    pairs = _pairs_from_manifest(args.manifest, extractor_model, args.max_pairs)
    G, D, history = train_application(
        pairs, gen_cfg, disc_cfg, train_cfg, out_dir=args.out_dir,
        steps_per_epoch=args.steps_per_epoch,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    save_generator(G, os.path.join(args.out_dir, "generator.pt"))
    save_discriminator(D, os.path.join(args.out_dir, "discriminator.pt"))
    if history:
        print(f"final rec loss {history[-1]['rec']:.4f} over {len(history)} epochs")
    print(f"wrote {os.path.join(args.out_dir, 'generator.pt')}")
    return 0


def cmd_eval(args) -> int:
    entries = data_mod.load_manifest(args.manifest)
    root = data_mod.manifest_root(args.manifest)
    labeled = [e for e in entries if e.label == 1 and e.gt_mask and e.landmarks]
    if args.limit:
        labeled = labeled[: args.limit]
    if not labeled:
        raise ValueError("manifest has no makeup entries with ground-truth masks")
    samples, gts = [], []
    for e in labeled:
        samples.append(
            {
                "image": load_image(os.path.join(root, e.image)),
                "landmarks": load_landmarks(os.path.join(root, e.landmarks)),
            }
        )
        gts.append(load_mask(os.path.join(root, e.gt_mask)))

    params = _extract_params(args)
    model = load_extractor(args.model) if args.model else None
    methods = []
    for name in [m.strip() for m in args.methods.split(",") if m.strip()]:
        def run(sample, _name=name):
            return pipeline.extract_stage(
                _name, sample["image"], sample["landmarks"], model=model, **params
            )
        methods.append((name, run))
    report, _ = evaluation.compare_methods(samples, gts, methods, out_dir=args.report)
    print(evaluation.format_auc_table(report))
    return 0


def cmd_synth(args) -> int:
    entries = data_mod.synth_faces(
        args.n, args.seed, args.out_dir, size=args.size, makeup_fraction=args.makeup_fraction
    )
    n_makeup = sum(e.label for e in entries)
    print(f"wrote {len(entries)} faces ({n_makeup} with makeup) under {args.out_dir}")
    return 0


def cmd_serve(args) -> int:
    from .service import main as serve_main

    serve_main(config_path=args.config, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="makeuplab", description="makeup mask extraction and transfer")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("extract", help="extract a makeup mask from an image")
    q.add_argument("--image", required=True)
    q.add_argument("--landmarks")
    q.add_argument("--method", default="bagnet", choices=pipeline.EXTRACT_METHODS)
    q.add_argument("--model", help="extractor checkpoint (bagnet method)")
    q.add_argument("--target", help="warp onto this image's geometry first")
    q.add_argument("--target-landmarks")
    q.add_argument("--out-mask", required=True)
    _add_extract_params(q)
    q.set_defaults(fn=cmd_extract)

    q = sub.add_parser("apply", help="apply a mask file (or a fresh extraction) to a target")
    q.add_argument("--target", required=True)
    q.add_argument("--reference", required=True)
    q.add_argument("--mask", help="mask file in target coordinates; extracted when absent")
    q.add_argument("--generator", help="generator checkpoint for refinement")
    q.add_argument("--bypass", action="store_true", help="skip generator refinement")
    q.add_argument("--target-landmarks")
    q.add_argument("--reference-landmarks")
    q.add_argument("--method", default="bagnet", choices=pipeline.EXTRACT_METHODS)
    q.add_argument("--model")
    q.add_argument("--out", required=True)
    _add_extract_params(q)
    q.set_defaults(fn=cmd_apply)

    q = sub.add_parser("transfer", help="full pipeline: warp, extract, apply")
    q.add_argument("--target", required=True)
    q.add_argument("--reference", required=True)
    q.add_argument("--extractor", help="extractor checkpoint")
    q.add_argument("--generator")
    q.add_argument("--bypass", action="store_true")
    q.add_argument("--method", default="bagnet", choices=pipeline.EXTRACT_METHODS)
    q.add_argument("--target-landmarks")
    q.add_argument("--reference-landmarks")
    q.add_argument("--keep-mask", help="save the intermediate mask here")
    q.add_argument("--out", required=True)
    _add_extract_params(q)
    q.set_defaults(fn=cmd_transfer)

    q = sub.add_parser("combine", help="merge masks through region selections")
    q.add_argument("--mask", action="append", required=True)
    q.add_argument("--regions", action="append", required=True,
                   help="comma list of lips,eyes,skin,other, or 'all'")
    q.add_argument("--landmarks", help="target-face landmarks for region rasters")
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_combine)

    q = sub.add_parser("train-extractor", help="train the patch classifier on a manifest")
    q.add_argument("--manifest", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--config", help="JSON with ExtractorConfig overrides")
    q.add_argument("--epochs", type=int, default=10)
    q.add_argument("--batch-size", type=int, default=32)
    q.add_argument("--lr", type=float, default=1e-4)
    q.add_argument("--flip-prob", type=float, default=0.5)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=cmd_train_extractor)

    q = sub.add_parser("train-gan", help="train the refinement generator")
    q.add_argument("--manifest", required=True)
    q.add_argument("--extractor", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--config", help="JSON with generator/discriminator/training sections")
    q.add_argument("--epochs", type=int, default=10)
    q.add_argument("--batch-size", type=int, default=4)
    q.add_argument("--steps-per-epoch", type=int, default=None)
    q.add_argument("--max-pairs", type=int, default=64)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=cmd_train_gan)

    q = sub.add_parser("eval", help="score extraction methods against ground truth")
    q.add_argument("--manifest", required=True)
    q.add_argument("--methods", default="bagnet,gmm,chroma")
    q.add_argument("--model", help="extractor checkpoint for the bagnet method")
    q.add_argument("--report", required=True, help="output directory for report + plot")
    q.add_argument("--limit", type=int, default=0)
    _add_extract_params(q)
    q.set_defaults(fn=cmd_eval)

    q = sub.add_parser("synth", help="generate a synthetic face dataset")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--size", type=int, default=64)
    q.add_argument("--makeup-fraction", type=float, default=0.5)
    q.set_defaults(fn=cmd_synth)

    q = sub.add_parser("serve", help="run the HTTP service")
    q.add_argument("--config")
    q.add_argument("--host")
    q.add_argument("--port", type=int)
    q.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
