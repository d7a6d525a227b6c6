"""Command-line entry point: synth, train, detect, eval, gridsearch, gradcheck.

Every option can also come from ``--config FILE`` holding ``key = value``
lines (keys are option names, ``-`` or ``_``); flags given on the command
line win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .baseline import GestureDictionary, load_svms, save_svms
from .core import GESTURES
from .energy import CandidateFilterConfig
from .fsm import FsmConfig
from .io import load_dataset, load_sequences, read_spans, save_dataset, write_spans
from .metrics import match_and_score, report_csv, report_json, summary_table
from .pipelines import (
    BaselineDetector,
    EnergyDetector,
    FrameLabelDetector,
    build_templates,
    energy_factory,
    grid_search,
    run_detector,
)
from .recognizers import RecognizerConfig, TrainProtocol, load_bundle, train_ensemble
from .synth import SynthConfig, synth_generate
from .trajectory import ClassTemplates

ANNOTATIONS = "annotations.txt"
log = logging.getLogger("gesturestream")


class CliError(Exception):
    pass


def read_config(path) -> dict:
    out = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_no}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="gesturestream", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value option file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["synth"] = sub.add_parser("synth", help="write a synthetic dataset directory")
    p.add_argument("--out")
    p.add_argument("--sequences", type=int, default=40)
    p.add_argument("--gestures", type=_ints, default=(4,), help="gestures per sequence, e.g. 3,4,5")
    p.add_argument("--classes", default="", help="comma-separated class names (default: all 18)")
    p.add_argument("--noise", type=float, default=0.05, help="jitter standard deviation in mm")
    p.add_argument("--idle-amplitude", type=float, default=5.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--prefix", default="seq")
    p.add_argument("--seed", type=int, default=0)

    p = subs["train"] = sub.add_parser("train", help="train a baseline or recognizer model directory")
    p.add_argument("--method", choices=("baseline", "udeepgru", "tsgr"))
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None, help="SVM epochs (200) or recognizer epochs (30)")
    p.add_argument("--lr", type=float, default=None, help="SVM lr (0.05) or Adam lr (2e-4)")
    p.add_argument("--reg", type=float, default=1e-3)
    p.add_argument("--non-gestures", type=int, default=None)
    p.add_argument("--boundary-negatives", type=int, default=None)
    p.add_argument("--widths", type=_ints, default=())
    p.add_argument("--recipe", default="pos_speed_accel")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--max-chunk", type=int, default=256)
    p.add_argument("--validation", type=int, default=6)
    p.add_argument("--members", type=int, default=1)
    p.add_argument("--patience", type=int, default=10, help="epochs without validation F1 gain; 0 disables")
    p.add_argument("--jitter", type=float, default=0.0, help="training position noise in mm (off by default)")

    p = subs["detect"] = sub.add_parser("detect", help="run a detector over a sequence directory")
    p.add_argument("--method", choices=("baseline", "udeepgru", "tsgr", "fsm", "energy"))
    p.add_argument("--model")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--recognizer", choices=("udeepgru", "tsgr"), default="tsgr",
                   help="per-frame recognizer feeding fsm and energy")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--stride", type=int, default=None, help="baseline grid step (6) or energy stride (10)")
    p.add_argument("--window", type=int, default=40)
    p.add_argument("--end-confirm", type=int, default=25)
    p.add_argument("--no-histogram", action="store_true")

    p = subs["eval"] = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--gt")
    p.add_argument("--pred")
    p.add_argument("--out", help="per-class CSV report")
    p.add_argument("--json", help="optional JSON mirror")
    p.add_argument("--in", dest="input", help="sequence directory (lengths); default: inferred from spans")

    p = subs["gridsearch"] = sub.add_parser("gridsearch", help="tune the energy detector on validation data")
    p.add_argument("--model")
    p.add_argument("--in", dest="input")
    p.add_argument("--recognizer", choices=("udeepgru", "tsgr"), default="tsgr")
    p.add_argument("--alpha", type=_floats, default=[0.3, 0.5, 0.7])
    p.add_argument("--beta", type=_floats, default=[0.1, 0.3, 0.5])
    p.add_argument("--lam", type=_floats, default=[0.5])
    p.add_argument("--epsilon", type=_floats, default=[])
    p.add_argument("--stride", type=_ints, default=(10,))
    p.add_argument("--window", type=_ints, default=(40,))
    p.add_argument("--out", help="CSV table of every grid point")

    p = subs["gradcheck"] = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=4)
    p.add_argument("--step", type=float, default=1e-4)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = subs[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        # string defaults go through each option's type, so config values parse like flags
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
        for a in sub._actions:
            if a.dest in cfg and a.type is not None and isinstance(getattr(args, a.dest), str):
                setattr(args, a.dest, a.type(getattr(args, a.dest)))
            elif a.dest in cfg and a.const is True and isinstance(getattr(args, a.dest), str):
                setattr(args, a.dest, getattr(args, a.dest).lower() in ("1", "true", "yes", "on"))
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise CliError(f"{args.command}: missing required option(s): " + ", ".join("--" + n for n in missing))


def _dataset(directory):
    directory = Path(directory)
    return load_dataset(directory, directory / ANNOTATIONS)


def cmd_synth(args):
    _require(args, "out")
    classes = tuple(c for c in args.classes.split(",") if c.strip()) or tuple(GESTURES)
    cfg = SynthConfig(classes=classes, gestures_per_sequence=tuple(args.gestures), n_sequences=args.sequences,
                      noise_mm=args.noise, idle_amplitude_mm=args.idle_amplitude, frame_rate_hz=args.rate,
                      seed=args.seed, prefix=args.prefix)
    sequences, spans = synth_generate(cfg)
    out = Path(args.out)
    save_dataset(sequences, spans, out, out / ANNOTATIONS)
    print(f"wrote {len(sequences)} sequences and {len(spans)} spans to {out}")


def cmd_train(args):
    _require(args, "method", "data", "model")
    sequences, spans = _dataset(args.data)
    model = Path(args.model)
    model.mkdir(parents=True, exist_ok=True)
    if args.method == "baseline":
        det = BaselineDetector.train(sequences, spans, args.non_gestures, args.boundary_negatives,
                                     epochs=args.epochs or 200, lr=args.lr or 0.05, reg=args.reg, seed=args.seed)
        det.dictionary.save(model / "dictionary.npz")
        save_svms(det.models, model / "svms.txt")
        print(f"baseline: {int(det.dictionary.is_representation.sum())} representatives, {len(det.models)} SVMs")
        return
    config = RecognizerConfig(kind=args.method, recipe=args.recipe, widths=args.widths, gamma=args.gamma,
                              seed=args.seed)
    protocol = TrainProtocol(lr=args.lr or 2e-4, batch=args.batch, max_chunk=args.max_chunk,
                             validation_sequences=args.validation, epochs=args.epochs or 30, seed=args.seed,
                             patience=args.patience or None, jitter_mm=args.jitter)
    if args.members == 1:
        from .recognizers import train_recognizer

        members = [train_recognizer(config, protocol, sequences, spans,
                                    on_epoch=lambda e, l, f: print(f"epoch {e}: loss {l:.4f} val F1 {f:.4f}"))]
    else:
        members = train_ensemble(config, protocol, sequences, spans, args.members)
    for old in model.glob(f"{args.method}-*.rec"):
        old.unlink()
    for i, m in enumerate(members):
        m.save(model / f"{args.method}-{i}.rec")
    build_templates(sequences, spans).save(model / "templates.txt")
    print(f"{args.method}: saved {len(members)} member(s) to {model}")


def _members(model: Path, kind: str):
    paths = sorted(model.glob(f"{kind}-*.rec"))
    if not paths:
        raise CliError(f"no {kind} recognizer in {model}; run train --method {kind} first")
    return [load_bundle(p) for p in paths]


def make_detector(args):
    model = Path(args.model)
    if args.method == "baseline":
        return BaselineDetector(GestureDictionary.load(model / "dictionary.npz"), load_svms(model / "svms.txt"),
                                args.stride or 6)
    if args.method in ("udeepgru", "tsgr"):
        return FrameLabelDetector(_members(model, args.method))
    members = _members(model, args.recognizer)
    if args.method == "fsm":
        return FrameLabelDetector(members, FsmConfig(end_confirm=args.end_confirm))
    templates = None
    if not args.no_histogram and (model / "templates.txt").exists():
        templates = ClassTemplates.load(model / "templates.txt")
    filters = CandidateFilterConfig(epsilon=args.epsilon, alpha=args.alpha, beta=args.beta)
    return EnergyDetector(members, templates, args.window, args.stride or 10, filters, args.lam)


def cmd_detect(args):
    _require(args, "method", "model", "input", "out")
    sequences = load_sequences(args.input)
    detector = make_detector(args)
    events, seconds = run_detector(detector, sequences)
    write_spans(events, args.out)
    mean = detector.timer.mean
    print(f"{detector.name}: {len(events)} events from {len(sequences)} sequences in {seconds:.2f} s"
          + (f" ({mean:.2e} s per classification)" if mean is not None else ""))


def cmd_eval(args):
    _require(args, "gt", "pred")
    if args.input:
        lengths = {s.id: len(s) for s in load_sequences(args.input)}
        gt, pred = read_spans(args.gt, lengths), read_spans(args.pred, lengths)
    else:
        gt, pred = read_spans(args.gt), read_spans(args.pred)
        lengths = {}
        # Jaccard only counts frames inside some span, so the last span end suffices
        for s in gt + pred:
            lengths[s.sequence_id] = max(lengths.get(s.sequence_id, 0), s.end_frame + 1)
    report = match_and_score(gt, pred, lengths)
    if args.out:
        Path(args.out).write_text(report_csv(report), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report_json({Path(args.pred).stem: report}), encoding="utf-8")
    print(summary_table({Path(args.pred).stem: report}))


def cmd_gridsearch(args):
    _require(args, "model", "input")
    sequences, spans = _dataset(args.input)
    model = Path(args.model)
    templates = ClassTemplates.load(model / "templates.txt") if (model / "templates.txt").exists() else None
    grid = {"alpha": args.alpha, "beta": args.beta, "lam": args.lam, "stride": list(args.stride),
            "window_length": list(args.window)}
    if args.epsilon:
        grid["epsilon"] = args.epsilon
    result = grid_search(energy_factory(_members(model, args.recognizer), templates), grid, sequences, spans)
    keys = sorted(grid)
    lines = [",".join(keys + ["jaccard"])]
    lines += [",".join([str(p[k]) for k in keys] + [repr(v)]) for p, v in result.table]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"best: {result.best} jaccard={result.best_score:.4f}")


def cmd_gradcheck(args):
    from .seqnet.gradcheck import run_standard_checks

    worst = 0.0
    for name, gamma, rep in run_standard_checks(args.seed, args.instances, args.step):
        worst = max(worst, rep.max_rel_error)
        print(f"{name:<16} gamma={gamma:<4} max_rel_error={rep.max_rel_error:.3e} checked={rep.n_checked} "
              f"kinks={rep.n_kinks}")
    print(f"worst {worst:.3e} ({'PASS' if worst < 1e-4 else 'FAIL'} at 1e-4)")
    return 0 if worst < 1e-4 else 1


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "detect": cmd_detect, "eval": cmd_eval,
            "gridsearch": cmd_gridsearch, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(over="ignore")
    try:
        return COMMANDS[args.command](args) or 0
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
