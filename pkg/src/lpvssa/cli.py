"""Command-line interface.

Subcommands: simulate, identify, validate, markov, covariances and
search-selection. Every subcommand prints a plain table by default and a
JSON document with ``--json``. Exit status is 0 on success, 1 when a
numerical step fails and 2 for bad input.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import casestudy
from .covariances import (
    empirical_output_moments,
    empirical_psi_uy,
    estimate_input_stats,
    exact_psi_uy,
)
from .errors import IdentificationError, InputError, LpvError, NumericalError, ValidationError
from .hankel import search_selection, search_words
from .identify import IdentifyConfig, identify, markov_table
from .metrics import FitReport, snr_db
from .model import (
    SignalSpec,
    generate,
    load_dataset,
    load_model,
    load_noise,
    predict_one_step,
    save_dataset,
    save_model,
    save_noise,
    sub_markov,
)
from .words import enumerate_words, format_word, parse_word

logger = logging.getLogger("lpvssa")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _word_list(text):
    try:
        return [parse_word(t.strip()) for t in text.split(",")]
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _model(path):
    return casestudy.example_model() if path is None else load_model(path)


def _emit(args, payload, text):
    if args.json:
        json.dump(payload, sys.stdout, indent=1, allow_nan=False)
        sys.stdout.write("\n")
    else:
        print(text)


def cmd_simulate(args):
    model = _model(args.model)
    base = casestudy.example_signals() if args.model is None else SignalSpec()
    signals = SignalSpec(
        input_dist=args.input_dist or base.input_dist,
        input_scale=base.input_scale if args.input_scale is None else args.input_scale,
        sched_dist=args.sched_dist or base.sched_dist,
        sched_scale=base.sched_scale if args.sched_scale is None else args.sched_scale,
        noise_dist=base.noise_dist,
        noise_scale=base.noise_scale if args.noise_scale is None else args.noise_scale,
    )
    data, v = generate(model, args.n, args.seed, signals, burn_in=args.burn_in)
    save_dataset(data, args.out)
    if args.noise_out:
        save_noise(v, args.noise_out)
    snr = snr_db(data.y, v)
    payload = {
        "path": str(args.out),
        "n": len(data),
        "n_y": data.n_y,
        "n_u": data.n_u,
        "n_mu": data.n_mu,
        "seed": args.seed,
        "snr_db": snr if np.isfinite(snr) else None,
    }
    _emit(args, payload, f"wrote {len(data)} samples to {args.out} (SNR {snr:.2f} dB)")
    return 0


def _config_from_args(args, data):
    if args.config:
        cfg = IdentifyConfig.load(args.config)
    else:
        cfg = casestudy.example_config(known_statistics=False)
        if data.n_y != 1 or data.n_u != 1 or data.n_mu != 2:
            raise ValidationError("no --config given and the data do not match the bundled example")
    changes = {}
    if args.iters is not None:
        changes["max_iter"] = args.iters
    if args.variant is not None:
        changes["split_variant"] = args.variant
    if args.rank_tol is not None:
        changes["rank_tol"] = args.rank_tol
    if args.known_statistics:
        sig = casestudy.example_signals()
        changes.update(weights=sig.weights(data.n_mu), Lambda_u=sig.input_covariance(data.n_u))
    return cfg.with_(**changes) if changes else cfg


def cmd_identify(args):
    data = load_dataset(args.data)
    cfg = _config_from_args(args, data)
    try:
        rep = identify(data, cfg)
    except IdentificationError as exc:
        if isinstance(exc.cause, InputError):
            raise exc.cause from exc
        raise
    payload = rep.to_dict()
    lines = [f"identified model: {rep.model.n_x} states "
             f"({rep.deterministic.n_x} input-driven, {rep.stochastic.n_x} noise-driven)"]
    if args.validate:
        val = load_dataset(args.validate)
        fit = FitReport.from_paths(val.y, predict_one_step(rep.model, val))
        payload["fit"] = fit.to_dict()
        lines.append(f"{'':>6} {'BFR %':>8} {'VAF %':>8}")
        for i, (b, v) in enumerate(zip(fit.bfr, fit.vaf), start=1):
            lines.append(f"{'y' + str(i):>6} {b:8.2f} {v:8.2f}")
    if args.reference:
        ref = load_model(args.reference)
        words = casestudy.MARKOV_WORDS
        payload["markov"] = [
            {
                "word": format_word(w),
                "estimated": sub_markov(rep.model, w).tolist(),
                "true": sub_markov(ref, w).tolist(),
            }
            for w in words
        ]
        lines.append(markov_table(words, rep.model, ref, casestudy.MARKOV_LABELS))
    if args.out_model:
        save_model(rep.model, args.out_model)
    if args.out_report:
        Path(args.out_report).write_text(json.dumps(payload, indent=1, allow_nan=False))
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_validate(args):
    model = load_model(args.model)
    data = load_dataset(args.data)
    noise = load_noise(args.noise) if args.noise else None
    fit = FitReport.from_paths(data.y, predict_one_step(model, data), noise)
    lines = [f"{'':>6} {'BFR %':>8} {'VAF %':>8}"]
    for i, (b, v) in enumerate(zip(fit.bfr, fit.vaf), start=1):
        lines.append(f"{'y' + str(i):>6} {b:8.2f} {v:8.2f}")
    if fit.snr_db is not None:
        lines.append(f"SNR {fit.snr_db:.2f} dB")
    _emit(args, fit.to_dict(), "\n".join(lines))
    return 0


def cmd_markov(args):
    model = _model(args.model)
    words = args.words if args.words is not None else enumerate_words(model.n_mu, args.max_len)
    values = {format_word(w): sub_markov(model, w).tolist() for w in words}
    text = "\n".join(f"{k:>10}  {np.array2string(np.asarray(v), precision=6)}" for k, v in values.items())
    _emit(args, {"values": values}, text)
    return 0


def cmd_covariances(args):
    data = load_dataset(args.data)
    L_hat, p_hat = estimate_input_stats(data)
    p = p_hat if args.weights is None else np.asarray(args.weights, dtype=float)
    if args.kind == "uy":
        series = empirical_psi_uy(data, args.words, p, L_hat)
        payload = {"kind": "uy", "values": series.to_dict()}
    else:
        series, T = empirical_output_moments(data, [w for w in args.words if w], p)
        payload = {"kind": "yy", "values": series.to_dict(), "second_moments": T.tolist()}
    payload["weights"] = np.asarray(p).tolist()
    text = "\n".join(f"{k:>10}  {np.array2string(np.asarray(v), precision=6)}" for k, v in payload["values"].items())
    _emit(args, payload, text)
    return 0


def cmd_search_selection(args):
    if args.data:
        data = load_dataset(args.data)
        L_hat, p_hat = estimate_input_stats(data)
        series = empirical_psi_uy(data, search_words(data.n_mu, args.n), p_hat, L_hat)
        n_mu = data.n_mu
    else:
        model = _model(args.model)
        series = exact_psi_uy(model, search_words(model.n_mu, args.n))
        n_mu = model.n_mu
    sel = search_selection(series, args.n, n_mu, strategy=args.strategy, rank_tol=args.rank_tol)
    text = "alpha: " + ", ".join(f"({format_word(u)},{k})" for u, k in sel.alpha)
    text += "\nbeta:  " + ", ".join(f"({s},{format_word(v)},{l})" for s, v, l in sel.beta)
    _emit(args, sel.to_dict(), text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lpvssa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "generate a dataset from a model")
    sp.add_argument("--model", help="model JSON (default: bundled example)")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="dataset CSV")
    sp.add_argument("--noise-out", help="also write the noise path here")
    sp.add_argument("--noise-scale", type=_nonneg_float, help="0 gives noise-free data")
    sp.add_argument("--input-dist", choices=["uniform", "normal"])
    sp.add_argument("--input-scale", type=_nonneg_float)
    sp.add_argument("--sched-dist", choices=["uniform", "normal"])
    sp.add_argument("--sched-scale", type=_nonneg_float)
    sp.add_argument("--burn-in", type=int, default=1000)

    sp = add("identify", cmd_identify, "identify a model from a dataset")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", help="identification config JSON (default: bundled selections)")
    sp.add_argument("--iters", type=_positive_int)
    sp.add_argument("--variant", choices=["residual", "analytic"])
    sp.add_argument("--rank-tol", type=float)
    sp.add_argument("--known-statistics", action="store_true",
                    help="use the bundled signal statistics instead of sample estimates")
    sp.add_argument("--validate", help="validation dataset CSV for BFR/VAF")
    sp.add_argument("--reference", help="true model JSON for a sub-Markov comparison")
    sp.add_argument("--out-model")
    sp.add_argument("--out-report")

    sp = add("validate", cmd_validate, "one-step-ahead fit of a model on a dataset")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--noise", help="noise path CSV, adds the SNR")

    sp = add("markov", cmd_markov, "sub-Markov parameters of a model")
    sp.add_argument("--model", help="model JSON (default: bundled example)")
    sp.add_argument("--max-len", type=int, default=4)
    sp.add_argument("--words", type=_word_list, help="comma-separated words, e.g. 11,21,e")

    sp = add("covariances", cmd_covariances, "empirical covariances of a dataset")
    sp.add_argument("--data", required=True)
    sp.add_argument("--words", type=_word_list, required=True)
    sp.add_argument("--kind", choices=["uy", "yy"], default="uy")
    sp.add_argument("--weights", type=float, nargs="+", help="scheduling weights (default: estimated)")

    sp = add("search-selection", cmd_search_selection, "find a full-rank Hankel selection")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--model", help="model JSON (exact covariances; default: bundled example)")
    src.add_argument("--data", help="dataset CSV (estimated covariances)")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--strategy", choices=["exhaustive", "greedy"], default="exhaustive")
    sp.add_argument("--rank-tol", type=float, default=1e-8)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except LpvError as exc:  # pragma: no cover - every error is one of the two families
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
