"""Command-line driver for the fit -> stump -> fungus -> compare workflow.

Exit codes: 0 success, 1 usage error, 2 runtime error.  All file writes are
atomic; identical seeds and configs reproduce output files byte for byte.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io as sfio
from .diagnostics import ks_report, TimingReport, emit_plot_data
from .hmc import HmcConfig, run_chain
from .models import attain, marbles, normal, rats
from .stump import (
    StumpFungusSpec,
    WeightOptConfig,
    calibrated_max_iters,
    draw_sample_set,
    load_stump,
    optimize_weights,
    save_stump,
)

MODELS = ("normal", "marbles", "rats", "attain")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p, *, out_required=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--draws", type=int, default=5000)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--leapfrog", type=int, default=10)
    p.add_argument("--out", required=out_required)


def _config(args, seed=None):
    return HmcConfig(
        leapfrog_steps=args.leapfrog,
        initial_step_size=args.step_size,
        burn_in=args.burnin,
        draws=args.draws,
        seed=args.seed if seed is None else seed,
    )


def _child_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _n_workers():
    env = os.environ.get("SF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _pool_map(fn, items):
    workers = min(_n_workers(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_normal_series(path):
    rows = sfio._read_rows(path, ("y",))
    out = []
    for lineno, row in rows:
        try:
            out.append(float(row[0]))
        except ValueError as exc:
            raise sfio.DataError(f"{path}:{lineno}: {exc}") from None
    return np.asarray(out)


def _load_data(model, path):
    if path is None:
        if model == "normal":
            return np.asarray(normal.Y_OBSERVED)
        raise UsageError(f"--data is required for model {model!r}")
    if model == "normal":
        return _load_normal_series(path)
    if model == "marbles":
        return marbles.MarblesData(tuple(sfio.load_marbles_csv(path)))
    if model == "rats":
        return rats.RatsData(tuple(sfio.load_rats_csv(path)))
    if model == "attain":
        return attain.from_columns(sfio.load_attain_csv(path))
    raise UsageError(f"unknown model {model!r}")


def _hier_model(model, data):
    if model == "normal":
        return normal.model(data)
    if model == "marbles":
        return marbles.hier_model(data)
    if model == "rats":
        return rats.hier_model(data)
    return attain.hier_model(data)


def cmd_fit_hier(args):
    data = _load_data(args.model, args.data)
    model = _hier_model(args.model, data)
    config = _config(args)
    samples = run_chain(model, config)
    sfio.save_posterior(samples, model.model_id, config, args.out)
    return 0


def cmd_fit_unpooled(args):
    if args.model != "rats":
        raise UsageError("fit-unpooled supports only --model rats")
    data = _load_data("rats", args.data)
    if args.all_groups:
        os.makedirs(args.out, exist_ok=True)

        def fit(i):
            n, y = data.rows[i]
            model = rats.unpooled_model(n, y)
            config = _config(args, seed=_child_seed(args.seed, i))
            samples = run_chain(model, config)
            path = os.path.join(args.out, f"unpooled_{i:03d}.json")
            sfio.save_posterior(samples, f"rats-unpooled[{i}]", config, path)

        _pool_map(fit, list(range(data.count)))
        return 0
    if args.group is None:
        raise UsageError("fit-unpooled needs --group or --all-groups")
    n, y = data.rows[args.group]
    model = rats.unpooled_model(n, y)
    config = _config(args)
    samples = run_chain(model, config)
    sfio.save_posterior(samples, f"rats-unpooled[{args.group}]", config, args.out)
    return 0


def cmd_fit_eb(args):
    data = _load_data(args.model, args.data)
    hyper_post, _, _ = sfio.load_posterior(args.hyper_posterior)
    if args.model == "marbles":
        p0 = float(np.mean(hyper_post.column("p0")))
        model = marbles.eb_model(data, p0)
    elif args.model == "attain":
        means = np.asarray(
            [float(np.mean(hyper_post.column(n))) for n in attain.hyper_names()]
        )
        model = attain.eb_model(data, means)
    else:
        raise UsageError("fit-eb supports --model marbles or attain")
    config = _config(args)
    samples = run_chain(model, config)
    sfio.save_posterior(samples, model.model_id, config, args.out)
    return 0


def _attain_labels_from_names(names):
    labels = []
    for hn in attain.HIERARCHIES:
        pat = re.compile(rf"^{hn}(\d+)_b0$")
        found = sorted(int(m.group(1)) for n in names if (m := pat.match(n)))
        labels.append(found)
    return labels


def _opt_config(args, max_iters):
    return WeightOptConfig(
        learning_rate=args.opt_lr,
        momentum=args.opt_momentum,
        max_iters=max_iters,
        grad_tol=args.opt_tol,
    )


def cmd_make_stump(args):
    posterior, _, _ = sfio.load_posterior(args.posterior)
    size = args.stump_size
    if args.model == "normal":
        sample_set = normal.surrogate_sample_set()
        hyper = normal.hyper_set(posterior)
        kernel = normal.kernel
        log_partition = normal.log_partition
    elif args.model == "marbles":
        cols = [c for c in posterior.names if re.match(r"^p[1-9]\d*$", c)]
        sample_set = draw_sample_set(
            posterior, [[c] for c in cols], size, args.seed, model_id="marbles"
        )
        hyper = marbles.hyper_set(posterior)
        kernel = marbles.kernel
        log_partition = marbles.log_partition
    elif args.model == "rats":
        cols = [c for c in posterior.names if re.match(r"^p\d+$", c)]
        sample_set = draw_sample_set(
            posterior, [[c] for c in cols], size, args.seed, model_id="rats"
        )
        hyper = rats.hyper_set(posterior)
        kernel = rats.kernel
        log_partition = rats.log_partition
    elif args.model == "attain":
        labels = _attain_labels_from_names(posterior.names)
        sizes = [len(ls) for ls in labels]

        class _Sized:
            def group_sizes(self):
                return tuple(sizes)

        sample_set = attain.make_stump(posterior, _Sized(), size, args.seed)
        hyper = attain.hyper_set(posterior)
        kernel = attain.kernel
        log_partition = attain.log_partition
    else:
        raise UsageError(f"unknown model {args.model!r}")
    if args.opt_iters is not None:
        budget = args.opt_iters
    else:
        # The ascent objective degenerates if run to convergence (see
        # calibrated_max_iters); cap the budget at the matched region.
        cap = WeightOptConfig().max_iters
        budget = calibrated_max_iters(
            sample_set, hyper, kernel, log_partition, _opt_config(args, cap)
        )
    optimized = optimize_weights(sample_set, hyper, kernel, _opt_config(args, budget))
    optimized.meta.setdefault("model_id", args.model)
    save_stump(optimized, args.out)
    return 0


def _fungus_model(model, stump, data, group):
    if model == "normal":
        return normal.stoch_model(stump)
    if model == "marbles":
        spec = StumpFungusSpec(stump, data.restrict(group), "marbles")
        return marbles.sf_model(spec)
    if model == "rats":
        spec = StumpFungusSpec(stump, data.rows[group], "rats")
        return rats.sf_model(spec)
    spec = StumpFungusSpec(stump, attain.restrict_to_school(data, group), "attain")
    return attain.sf_model(spec)


def _fungus_groups(model, data):
    if model == "marbles":
        return list(range(data.n_boxes))
    if model == "rats":
        return list(range(data.count))
    if model == "attain":
        return sorted(int(s) for s in np.unique(data.sid))
    raise UsageError(f"--all-groups is not applicable to model {model!r}")


def cmd_fit_fungus(args):
    stump = load_stump(args.stump)
    data = None
    if args.model != "normal":
        data = _load_data(args.model, args.data)
    if args.all_groups:
        groups = _fungus_groups(args.model, data)
        os.makedirs(args.out, exist_ok=True)

        def fit(group):
            model = _fungus_model(args.model, stump, data, group)
            config = _config(args, seed=_child_seed(args.seed, group))
            samples = run_chain(model, config)
            path = os.path.join(args.out, f"fungus_{group:03d}.json")
            sfio.save_posterior(samples, f"{model.model_id}[{group}]", config, path)

        _pool_map(fit, groups)
        return 0
    if args.model != "normal" and args.group is None:
        raise UsageError("fit-fungus needs --group or --all-groups")
    model = _fungus_model(args.model, stump, data, args.group)
    config = _config(args)
    samples = run_chain(model, config)
    sfio.save_posterior(samples, model.model_id, config, args.out)
    return 0


def cmd_compare(args):
    a, _, _ = sfio.load_posterior(args.a)
    b, _, _ = sfio.load_posterior(args.b)
    names = args.params.split(",") if args.params else None
    report = ks_report(a, b, names)
    doc = {
        "per_marginal": [{"name": n, "ks": k} for n, k in report.per_marginal],
        "median_ks": report.median_ks,
    }
    text = json.dumps(doc) + "\n"
    if args.out:
        sfio.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args):
    data = None
    if args.model != "normal" or args.data:
        data = _load_data(args.model, args.data)
    if args.stump:
        stump = load_stump(args.stump)
        model = _fungus_model(args.model, stump, data, args.group)
    else:
        model = _hier_model(args.model, data if data is not None
                            else np.asarray(normal.Y_OBSERVED))
    config = _config(args)
    samples = run_chain(model, config)
    report = TimingReport(
        label=model.model_id,
        wall_time_seconds=samples.wall_time_seconds,
        burn_in=config.burn_in,
        draws=config.draws,
        seed=config.seed,
    )
    sys.stdout.write(json.dumps(report.to_dict()) + "\n")
    return 0


def cmd_synth(args):
    if args.model == "marbles":
        data = marbles.generate_data(args.seed, draws_per_box=args.draws_per_box)
        sfio.save_marbles_csv(data.draws, args.out)
    elif args.model == "rats":
        data = rats.generate_data(args.seed, count=args.count)
        sfio.save_rats_csv(data.rows, args.out)
    elif args.model == "attain":
        data = attain.synthesize(
            args.seed, n_pupils=args.pupils, n_pid=args.primary,
            n_sid=args.secondary,
        )
        sfio.save_attain_csv(data.to_columns(), args.out)
    else:
        raise UsageError("synth supports marbles, rats, or attain")
    return 0


def cmd_plot_data(args):
    posterior, _, _ = sfio.load_posterior(args.posterior)
    emit_plot_data(posterior, args.out)
    return 0


def build_parser():
    parser = _Parser(prog="stumpfungus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-hier", help="fit a hierarchical model")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--data")
    _add_common(p)
    p.set_defaults(func=cmd_fit_hier)

    p = sub.add_parser("fit-unpooled", help="fit per-group unpooled models")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--data")
    p.add_argument("--group", type=int)
    p.add_argument("--all-groups", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_fit_unpooled)

    p = sub.add_parser("fit-eb", help="fit an empirical-Bayes baseline")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--data")
    p.add_argument("--hyper-posterior", required=True,
                   help="posterior JSON from fit-hier; hyperparameters are "
                        "fixed to its means")
    _add_common(p)
    p.set_defaults(func=cmd_fit_eb)

    p = sub.add_parser("make-stump",
                       help="draw a weighted sample set and optimize weights")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--posterior", required=True)
    p.add_argument("--stump-size", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opt-lr", type=float, default=None)
    p.add_argument("--opt-momentum", type=float, default=0.9)
    p.add_argument("--opt-iters", type=int, default=None,
                   help="ascent iterations; default: calibrated stopping budget")
    p.add_argument("--opt-tol", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_stump)

    p = sub.add_parser("fit-fungus",
                       help="fit the stump-and-fungus model for new groups")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--stump", required=True)
    p.add_argument("--data")
    p.add_argument("--group", type=int)
    p.add_argument("--all-groups", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_fit_fungus)

    p = sub.add_parser("compare", help="KS report between two posterior files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--params")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time a fit; prints a JSON timing report")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--data")
    p.add_argument("--stump")
    p.add_argument("--group", type=int)
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--model", required=True, choices=("marbles", "rats", "attain"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--draws-per-box", type=int, default=2)
    p.add_argument("--count", type=int, default=rats.DEFAULT_COUNT)
    p.add_argument("--pupils", type=int, default=3435)
    p.add_argument("--primary", type=int, default=148)
    p.add_argument("--secondary", type=int, default=19)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plot-data",
                       help="emit histogram and ECDF CSVs for a posterior file")
    p.add_argument("--posterior", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure -> exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
