"""Command-line interface.

Subcommands: gen, castlist, train, eval, ablate, gradcheck, report, plus the
inspection tools `semantics dump` and `naming eval`. Training options come
from a JSON config file with individual flag overrides. Any domain error
prints a one-line message and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import harness
from .carn import ModalityConfig, Model, build_vocab, visual_stream, subtitle_stream
from .castlist import build_cast_list, count_speakers, scaled_min_count
from .corpus import GenConfig, clip_view, generate_corpus, read_corpus, write_corpus
from .errors import CharqaError
from .harness import TrainConfig, evaluate, grad_check, train, write_metrics_csv
from .naming import face_accuracy


def _add_train_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--modality", help='variant label, e.g. "Sub + Objs_nm + Rels_nm"')
    p.add_argument("--use-ts", action=argparse.BooleanOptionalAction, dest="use_ts")
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--max-ratio", type=float, dest="max_ratio")


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = TrainConfig.from_dict(json.load(fh))
    overrides = {}
    for name in ("epochs", "batch_size", "learning_rate", "lam", "epsilon",
                 "seed", "use_ts", "min_count", "max_ratio"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if getattr(args, "modality", None):
        overrides["modality"] = ModalityConfig.from_label(args.modality)
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_gen(args) -> int:
    kw = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            kw.update(json.load(fh))
    for name, dest in (("k_principals", "k"), ("n_extras", "extras"),
                       ("n_clips", "clips"), ("frames_per_clip", "frames"),
                       ("noise_sigma", "noise"), ("cooccur_rho", "rho"),
                       ("d_f", "d_f"), ("seed", "seed")):
        v = getattr(args, dest)
        if v is not None:
            kw[name] = v
    cfg = GenConfig(**kw)
    clips = generate_corpus(cfg)
    write_corpus(clips, args.out)
    print(f"wrote {len(clips)} clips to {args.out}")
    return 0


def _cmd_castlist(args) -> int:
    clips = read_corpus(args.corpus)
    counts = count_speakers(clips)
    min_count = args.min_count
    if min_count is None:
        min_count = scaled_min_count(sum(counts.values()))
    cast = build_cast_list(counts, min_count=min_count, max_ratio=args.max_ratio)
    payload = cast.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    print(json.dumps(payload))
    return 0


def _cmd_train(args) -> int:
    clips = read_corpus(args.corpus)
    cfg = _train_config(args)
    model, report = train(clips, cfg)
    model.save(args.out)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"checkpoint: {args.out}")
    print(f"qa_acc={report.qa_acc:.4f} visual={report.qa_acc_visual:.4f} "
          f"textual={report.qa_acc_textual:.4f} face_acc={report.face_acc:.4f}")
    return 0


def _cmd_eval(args) -> int:
    model = Model.load(args.checkpoint)
    clips = read_corpus(args.corpus)
    modality = ModalityConfig.from_label(args.modality) if args.modality else ModalityConfig()
    settings = [args.use_ts] if args.use_ts is not None else [True, False]
    reports = [evaluate(model, clips, use_ts=ts, modality=modality) for ts in settings]
    if args.out:
        write_metrics_csv(reports, args.out)
    for r in reports:
        tag = "w/ ts" if r.use_ts else "w/o ts"
        print(f"{tag}: qa_acc={r.qa_acc:.4f} visual={r.qa_acc_visual:.4f} "
              f"textual={r.qa_acc_textual:.4f} face_acc={r.face_acc:.4f}")
    return 0


def _cmd_ablate(args) -> int:
    clips = read_corpus(args.corpus)
    cfg = _train_config(args)
    reports = harness.ablate(clips, cfg)
    write_metrics_csv(reports, args.out)
    print(harness.format_report(reports))
    print(f"wrote {len(reports)} rows to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    reports = grad_check(args.component, tolerance=args.tolerance,
                         n_configs=args.configs, seed=args.seed)
    ok = True
    for rep in reports:
        print(rep.format())
        ok = ok and rep.passed
    return 0 if ok else 1


def _cmd_report(args) -> int:
    reports = []
    with open(args.metrics, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != list(harness.METRICS_COLUMNS):
            raise CharqaError(f"unexpected metrics columns: {header}")
        for line in fh:
            v = line.strip().split(",")
            if len(v) != len(header):
                continue
            reports.append(harness.MetricsReport(
                variant=v[0], use_ts=bool(int(v[1])), qa_acc=float(v[2]),
                qa_acc_visual=float(v[3]), qa_acc_textual=float(v[4]),
                face_acc=float(v[5]), seed=int(v[6])))
    if not reports:
        raise CharqaError("metrics file has no rows")
    print(harness.format_report(reports))
    return 0


def _cmd_semantics_dump(args) -> int:
    clips = read_corpus(args.corpus)
    modality = ModalityConfig.from_label(args.modality)
    counts = count_speakers(clips)
    cast = build_cast_list(counts, min_count=scaled_min_count(sum(counts.values())))
    model = Model.load(args.checkpoint) if args.checkpoint else None
    with open(args.out, "w", encoding="utf-8") as fh:
        for clip in clips:
            if model is not None:
                names = model.name_assignments(clip)
            elif clip.truth:
                names = {fid: n for fid, n in clip.truth.items() if n in cast}
            else:
                names = {}
            for qi, qa in enumerate(clip.qas):
                view, _ = clip_view(clip, qa, args.use_ts)
                toks, flags = visual_stream(view.frames, modality, names, cast)
                subs, sub_flags = subtitle_stream(view.subtitles, cast)
                fh.write(json.dumps({
                    "clip_id": clip.clip_id, "qa_index": qi,
                    "modality": modality.label(), "use_ts": args.use_ts,
                    "visual_tokens": toks, "visual_name_flags": flags,
                    "subtitle_tokens": subs, "subtitle_name_flags": sub_flags,
                }, separators=(",", ":")))
                fh.write("\n")
    print(f"wrote streams for {sum(len(c.qas) for c in clips)} items to {args.out}")
    return 0


def _cmd_naming_eval(args) -> int:
    model = Model.load(args.checkpoint)
    clips = read_corpus(args.corpus)
    correct = 0
    total = 0
    for clip in clips:
        if not clip.truth:
            continue
        preds = model.predict_faces(clip)
        n = len(preds.face_ids)
        if n:
            correct += round(face_accuracy(preds, clip.truth, model.cast) * n)
            total += n
    if total == 0:
        raise CharqaError("corpus has no faces with truth labels")
    print(f"face_acc={correct / total:.4f} over {total} faces")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="charqa",
                                 description="character-aware video-story QA")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with GenConfig fields")
    p.add_argument("--k", type=int, help="number of principal characters")
    p.add_argument("--extras", type=int)
    p.add_argument("--clips", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--d-f", type=int, dest="d_f")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("castlist", help="build the principal character list")
    p.add_argument("--corpus", required=True)
    p.add_argument("--min-count", type=int, dest="min_count")
    p.add_argument("--max-ratio", type=float, dest="max_ratio", default=1.0 / 10.0)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_castlist)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--metrics", help="write the metrics report as JSON")
    _add_train_overrides(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--modality")
    p.add_argument("--use-ts", action=argparse.BooleanOptionalAction, dest="use_ts")
    p.add_argument("--out", help="write metrics CSV")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate", help="train/evaluate all nine variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="metrics CSV path")
    _add_train_overrides(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--component", default="all",
                   choices=["all", *sorted(harness.GRAD_CHECKS)])
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--configs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("report", help="format a metrics CSV as a table")
    p.add_argument("--metrics", required=True)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("semantics", help="semantic stream tools")
    ssub = p.add_subparsers(dest="subcmd", required=True)
    pd = ssub.add_parser("dump", help="dump per-QA token streams")
    pd.add_argument("--corpus", required=True)
    pd.add_argument("--modality", required=True, help="e.g. objs_nm,rels_nm")
    pd.add_argument("--out", required=True)
    pd.add_argument("--checkpoint", help="use predicted names (default: truth sidecar)")
    pd.add_argument("--use-ts", action=argparse.BooleanOptionalAction,
                    dest="use_ts", default=False)
    pd.set_defaults(fn=_cmd_semantics_dump)

    p = sub.add_parser("naming", help="naming head tools")
    nsub = p.add_subparsers(dest="subcmd", required=True)
    pe = nsub.add_parser("eval", help="face-labeling accuracy vs truth")
    pe.add_argument("--checkpoint", required=True)
    pe.add_argument("--corpus", required=True)
    pe.set_defaults(fn=_cmd_naming_eval)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CharqaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
