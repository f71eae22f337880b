"""Command-line interface.

Subcommands: select-params, train, detect, eval, synth, spectrogram,
entropy-check.  Exit codes: 0 success, 1 input error, 2 infeasible encoding
(least-violating fallback written), 3 property violation.

Every subcommand accepts ``--config FILE``: a JSON object whose keys are the
long option names (dashes or underscores); flags on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import entropy, ingest, metrics, pipeline, spectral, synth
from .cluster import ClusterModel, InsufficientSamples
from .config import HyperParams
from .encoding import SelectionResult
from .errors import FreqDetectError

log = logging.getLogger("freqdetect")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_PROPERTY = 0, 1, 2, 3
HP_FIELDS = ("w_seg", "w_win", "c", "k_c", "w_min", "w_max", "budget")


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _hp(args, base: Optional[HyperParams] = None) -> HyperParams:
    base = base or HyperParams()
    changes = {k: getattr(args, k) for k in HP_FIELDS if getattr(args, k, None) is not None}
    return base.replace(**changes) if changes else base


def _features(args):
    if getattr(args, "features", None) is None:
        return None
    names = args.features.split(",") if isinstance(args.features, str) else list(args.features)
    pipeline.feature_columns(names)
    return names


def _records(path: str):
    try:
        return ingest.read_trace(path)
    except FileNotFoundError:
        raise InputError(f"no such trace: {path}") from None


def _flows(args, records=None):
    records = _records(args.trace) if records is None else records
    return ingest.group_flows(records, ingest.KeyMode(args.key_mode)).flows()


def _load_model(path: str) -> ClusterModel:
    try:
        return ClusterModel.load(path)
    except FileNotFoundError:
        raise InputError(f"no such model: {path}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise InputError(f"malformed model file {path}: {e}") from None


def _encoding(args) -> tuple[np.ndarray, Optional[list]]:
    if args.w is not None:
        return np.array([float(x) for x in args.w.split(",")]), _features(args)
    if args.encoding is None:
        raise InputError("an encoding is required: pass --encoding FILE or --w a,b,c")
    try:
        with open(args.encoding, encoding="utf-8") as f:
            d = json.load(f)
    except FileNotFoundError:
        raise InputError(f"no such encoding file: {args.encoding}") from None
    return np.asarray(d["w"], float), d.get("features", _features(args))


# ---------------------------------------------------------------------------
# commands

def cmd_select_params(args) -> int:
    hp = _hp(args)
    records = _records(args.trace)
    if not records:
        raise InputError("empty training trace")
    features = _features(args)
    result = pipeline.select_params(records, hp, quantile=args.quantile,
                                    search_budget=args.search_budget, seed=args.seed,
                                    key_mode=ingest.KeyMode(args.key_mode), features=features)
    doc = result.to_dict()
    doc["features"] = list(features or pipeline.FEATURES)
    if args.quantile is not None:
        doc["quantile"] = args.quantile
    _write_text(args.out, _dump(doc))
    if not result.feasible:
        print(f"no feasible encoding found; least-violating candidate violates "
              f"{result.violated_constraint_fraction:.4g} of constraints", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_train(args) -> int:
    flows = _flows(args)
    if not flows:
        raise InputError("empty training trace")
    if args.baseline == "fsc":
        model = pipeline.train_fsc(flows, _hp(args), seed=args.seed)
    else:
        w, features = _encoding(args)
        model = pipeline.train_spectral(flows, w, _hp(args), seed=args.seed, features=features)
    _write_text(args.out, model.to_json() + "\n")
    print(f"train_loss {model.train_loss!r}", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def _check_hp_override(args, model: ClusterModel) -> None:
    hp = _hp(args, model.hp)
    if hp.k_f != model.hp.k_f:
        raise FreqDetectError(f"feature dimension K_f={hp.k_f} does not match the model's {model.hp.k_f}")
    model.hp = hp


def cmd_detect(args) -> int:
    model = _load_model(args.model)
    _check_hp_override(args, model)
    records = _records(args.trace)
    if model.kind == "fsc":
        results = pipeline.fsc_detect(model, _flows(args, records), args.phi)
    else:
        results = pipeline.stream_detect(model, records, args.phi, ingest.KeyMode(args.key_mode),
                                         watermark=args.watermark)
    _write_text(args.out, "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results))
    return EXIT_OK


def _flow_labels(flows) -> np.ndarray:
    if any(f.labels is None for f in flows):
        raise InputError("evaluation needs a labeled trace (label column)")
    return np.array([int(f.malicious) for f in flows])


def _detector_report(name, scores, labels, threshold_base, phis):
    rows = []
    for phi in phis:
        tpr, fpr = metrics.confusion_at(scores, labels, phi * threshold_base)
        rows.append({"detector": name, "phi": float(phi), "threshold": float(phi * threshold_base),
                     "tpr": tpr, "fpr": fpr})
    summary = {"detector": name, "auc": metrics.auc(scores, labels), "eer": metrics.eer(scores, labels),
               "flows": int(len(labels)), "malicious": int(labels.sum())}
    return rows, summary


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    flows = [f for f in _flows(args) if len(f)]
    labels = _flow_labels(flows)
    if labels.all() or not labels.any():
        raise metrics.SingleClass("labels are uniform; both benign and malicious flows are needed")
    phis = np.geomspace(args.phi_min, args.phi_max, args.phi_count)
    detectors = [(model, "spectral" if model.kind != "fsc" else "fsc")]
    if args.fsc_model:
        detectors.append((_load_model(args.fsc_model), "fsc"))
    rows, summaries = [], []
    for m, name in detectors:
        scores = pipeline.fsc_scores(m, flows) if m.kind == "fsc" else pipeline.spectral_scores(m, flows)
        r, s = _detector_report(name, scores, labels, m.threshold(1.0), phis)
        rows += r
        summaries.append(s)
    csv_lines = ["detector,phi,threshold,tpr,fpr\n"]
    csv_lines += [f"{r['detector']},{r['phi']!r},{r['threshold']!r},{r['tpr']!r},{r['fpr']!r}\n" for r in rows]
    if args.out_csv:
        _write_text(args.out_csv, "".join(csv_lines))
    _write_text(args.out_json, _dump({"detectors": summaries,
                                      "phi_sweep": {"min": args.phi_min, "max": args.phi_max,
                                                    "count": args.phi_count}}))
    return EXIT_OK


def cmd_synth(args) -> int:
    flows = []
    if args.benign_flows:
        flows += synth.benign_population(args.benign_flows, seed=args.seed, duration_s=args.duration)
    if args.attack and args.attack_flows:
        flows += synth.attack_population(args.attack, args.attack_flows, seed=args.seed + 1,
                                         ratio=args.mix)
    if not flows:
        raise InputError("nothing to generate: set --benign-flows and/or --attack with --attack-flows")
    records = synth.merge_flows(flows)
    if args.out.endswith((".pcap", ".cap")):
        with open(args.out, "wb") as f:
            ingest.write_pcap(records, f)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            ingest.write_csv(records, f)
    print(f"{len(records)} packets in {len(flows)} flows -> {args.out}")
    return EXIT_OK


def cmd_spectrogram(args) -> int:
    flows = [f for f in _flows(args) if len(f)]
    if not flows:
        raise InputError("empty trace")
    if args.flow is not None:
        chosen = [f for f in flows if str(f.key) == args.flow]
        if not chosen:
            raise InputError(f"flow {args.flow!r} not in trace")
        flow = chosen[0]
    else:
        flow = max(flows, key=len)  # first largest in key order
    if args.model:
        model = _load_model(args.model)
        feats = pipeline.model_features(model, flow)
    else:
        w, features = _encoding(args)
        feats = pipeline.flow_features(flow, w, _hp(args), features)
    if feats.n_f == 0:
        raise InputError(f"flow {flow.key} has fewer packets than one frame")
    spectral.spectrogram_export(feats.R, args.out)
    print(f"{flow.key}: {feats.k_f}x{feats.n_f} -> {args.out}")
    return EXIT_OK


def cmd_entropy_check(args) -> int:
    spec = entropy.GaussianProcessSpec.constant(args.n, args.sigma)
    reports = [entropy.verify_theorem(t, spec, mc_samples=args.mc_samples, seed=args.seed, w=args.w)
               for t in range(1, 7)]
    doc = {"n": args.n, "sigma": args.sigma, "w": args.w, "mc_samples": args.mc_samples,
           "reports": [r.to_dict() for r in reports]}
    _write_text(args.out, _dump(doc))
    failed = [r.theorem for r in reports if not r.passed]
    if failed:
        print(f"bound check failed for theorem(s) {failed}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_hp(p):
    g = p.add_argument_group("hyper-parameters (default: recommended configuration)")
    g.add_argument("--w-seg", type=int, help="frame length in packets (50)")
    g.add_argument("--w-win", type=int, help="frames per sampling window (100)")
    g.add_argument("--c", type=float, help="log-scale constant (10)")
    g.add_argument("--k-c", type=int, help="number of cluster centers (10)")
    g.add_argument("--w-min", type=float, help="lower bound of encoding weights (10)")
    g.add_argument("--w-max", type=float, help="upper bound of encoding weights (1000)")
    g.add_argument("--budget", type=float, help="bound on a packet's encoded value (1e5)")


def _add_common(p, trace=True):
    p.add_argument("--config", help="JSON file with option values; command-line flags override it")
    if trace:
        p.add_argument("--trace", required=True, help="input trace (.csv or .pcap)")
        p.add_argument("--key-mode", default="SourceIP", choices=[m.value for m in ingest.KeyMode],
                       help="flow key (default SourceIP)")


def _add_encoding(p):
    p.add_argument("--encoding", help="JSON file from select-params")
    p.add_argument("--w", help="encoding vector as comma-separated weights, overrides --encoding")
    p.add_argument("--features", help="comma-separated per-packet features used with --w "
                                      f"(from {','.join(pipeline.FEATURES)}; default all)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freqdetect", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on standard error")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("select-params", help="choose the encoding vector from a training trace")
    _add_common(p)
    _add_hp(p)
    p.add_argument("--quantile", type=float,
                   help="accept candidates satisfying the row constraints on this fraction of packets "
                        "(default: every packet)")
    p.add_argument("--search-budget", type=int, default=6000, help="candidate evaluations (6000)")
    p.add_argument("--features", help=f"comma-separated subset of {','.join(pipeline.FEATURES)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="result JSON (default standard output)")
    p.set_defaults(func=cmd_select_params)

    p = sub.add_parser("train", help="fit the cluster model on a benign trace")
    _add_common(p)
    _add_hp(p)
    _add_encoding(p)
    p.add_argument("--baseline", choices=["fsc"], help="train the flow-statistics baseline instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="model JSON (default standard output)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="emit one JSON verdict line per flow")
    _add_common(p)
    _add_hp(p)
    p.add_argument("--model", required=True)
    p.add_argument("--phi", type=float, required=True, help="threshold multiplier on train_loss")
    p.add_argument("--watermark", type=int,
                   help="bound on buffered packets; larger flows are scored in segments")
    p.add_argument("--out", help="JSON-lines output (default standard output)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="ROC sweep, AUC and EER on a labeled trace")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--fsc-model", help="flow-statistics model evaluated side by side")
    p.add_argument("--phi-min", type=float, default=0.1)
    p.add_argument("--phi-max", type=float, default=100.0)
    p.add_argument("--phi-count", type=int, default=64)
    p.add_argument("--out-csv", help="per-phi TPR/FPR table")
    p.add_argument("--out-json", help="summary JSON (default standard output)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a labeled synthetic trace")
    _add_common(p, trace=False)
    p.add_argument("--benign-flows", type=int, default=0)
    p.add_argument("--duration", type=float, default=5.0, help="benign flow duration in seconds")
    p.add_argument("--attack", choices=[k.value for k in synth.Kind if k is not synth.Kind.BENIGN_GP])
    p.add_argument("--attack-flows", type=int, default=0)
    p.add_argument("--mix", type=int, default=0, help="inject r benign packets per attack packet")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help=".csv or .pcap")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrogram", help="export a flow's frequency features as a PPM image")
    _add_common(p)
    _add_hp(p)
    _add_encoding(p)
    p.add_argument("--model", help="take the encoding and hyper-parameters from a model")
    p.add_argument("--flow", help="flow key as printed by detect (default: largest flow)")
    p.add_argument("--out", required=True, help="output .ppm")
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("entropy-check", help="check the information-loss bounds numerically")
    _add_common(p, trace=False)
    p.add_argument("--n", type=int, default=50, help="packets per flow")
    p.add_argument("--sigma", type=float, default=1.0, help="per-packet standard deviation")
    p.add_argument("--w", type=float, default=10.0, help="encoding weight")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON (default standard output)")
    p.set_defaults(func=cmd_entropy_check)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    choices = ap._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if not known.config or command is None or "-h" in argv or "--help" in argv:
        return ap.parse_args(argv)
    try:
        with open(known.config, encoding="utf-8") as f:
            conf = json.load(f)
    except FileNotFoundError:
        raise InputError(f"no such config file: {known.config}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"config file is not valid JSON: {e}") from None
    if not isinstance(conf, dict):
        raise InputError("config file must hold a JSON object")
    conf = {**conf.pop("hyperparams", {}), **conf}
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    subparser = choices[command]
    known_dests = {a.dest for a in subparser._actions}
    unknown = sorted(set(conf) - known_dests)
    if unknown:
        raise InputError(f"unknown config keys for {command}: {unknown}")
    subparser.set_defaults(**conf)
    # required options may come from the file
    for a in subparser._actions:
        if a.dest in conf:
            a.required = False
    return ap.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InsufficientSamples as e:
        print(f"error: insufficient training samples: {e}", file=sys.stderr)
    except entropy.HypothesisViolation as e:
        print(f"error: hypothesis violated: {e}", file=sys.stderr)
    except (InputError, FreqDetectError, OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
