"""Command line driver.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import __version__
from .errors import KLCompandError, ParameterError
from .experiments import ExperimentConfig, badprior_study, format_csv, load_dataset, power_sweep, run
from .losses import asymptotic_loss, convergence_probe
from .methods import METHODS, make_quantizer
from .priors import dirichlet_marginal, solve_maximin_constants
from .quantizer import Quantizer
from .worstcase import WORSTCASE_FIELDS, adversarial_search, default_compander, worstcase_bound

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            v = float(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {part!r}") from None
        if v != int(v):
            raise argparse.ArgumentTypeError(f"not an integer: {part!r}")
        out.append(int(v))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _methods(text):
    out = [m.strip() for m in text.split(",") if m.strip()]
    if not out:
        raise argparse.ArgumentTypeError("method list is empty")
    bad = [m for m in out if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    return out


def _common(p, *, methods=None, K=None, bits=None, trials=None):
    if methods is not None:
        p.add_argument("--methods", type=_methods, default=methods, help="comma-separated method tags")
    if K is not None:
        p.add_argument("--K", type=_int_list, default=K, help="comma-separated alphabet sizes")
    if bits is not None:
        p.add_argument("--bits", type=_int_list, default=bits, help="comma-separated bit widths (N = 2**b)")
    if trials is not None:
        p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="klcompand", description="Compander quantization of probability vectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize a frequency file to integer codes")
    p.add_argument("--dataset", required=True, help="text, FASTA, symbol CSV or count table")
    p.add_argument("--method", choices=METHODS, default="approx_minimax")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--decode", choices=("midpoint", "centroid"), default="midpoint")
    p.add_argument("--kmer-k", type=int, default=8)
    p.add_argument("--out")

    p = sub.add_parser("eval", help="expected KL losses over methods, sizes and widths")
    _common(p, methods=["truncation", "approx_minimax", "power", "float"], K=[10_000], bits=[8, 16], trials=100)
    p.add_argument("--decode", choices=("midpoint", "centroid"), default="midpoint")
    p.add_argument("--dataset", action="append", default=[], help="evaluate a data file instead of synthetic K")
    p.add_argument("--kmer-k", type=int, default=8)
    p.add_argument("--constants-cache", help="text file of solved maximin constants")

    p = sub.add_parser("constants", help="solve maximin constants c_K, a_K, b_K")
    p.add_argument("--K", type=_int_list, default=[5, 10, 100, 1000, 10_000, 1_000_000])
    p.add_argument("--out")

    p = sub.add_parser("worstcase", help="worst-case bound and adversarial search")
    _common(p, methods=["minimax", "approx_minimax", "power"], K=[1000], bits=[8])
    p.add_argument("--budget", type=int, default=10_000)

    p = sub.add_parser("distill", help="degrading-cost bounds and a brute-force demo")
    p.add_argument("--K", type=_int_list, default=[10])
    p.add_argument("--log2-M", type=_float_list, default=[40.0, 100.0, 300.0], help="label budgets as log2 M")
    p.add_argument("--demo", type=int, default=5, help="random K=3, |B|=5, M=2 instances to solve")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("convergence", help="N^2 times single-letter loss against its limit")
    _common(p, methods=["power"], K=[100], bits=[8, 10, 12, 14, 16])

    p = sub.add_parser("badprior", help="uniform-quantizer scaling under the paired uniform prior")
    _common(p, methods=["truncation", "approx_minimax"], K=[256], bits=list(range(6, 13)), trials=2000)

    p = sub.add_parser("power-sweep", help="loss of power companders over exponents")
    _common(p, K=[10_000], bits=[8], trials=1)
    p.add_argument("--dataset", help="data file; default draws one uniform simplex vector")
    p.add_argument("--kmer-k", type=int, default=8)
    p.add_argument("--s", type=_float_list, help="exponents (default: a grid around 1/log K)")
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows, comments=()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def cmd_quantize(a):
    dist = load_dataset(a.dataset, a.kmer_k)
    q = make_quantizer(a.method, dist.K, a.bits, decode=a.decode)
    x = dist.probabilities
    codes, z, _ = q.quantize(x)
    rows = [(s, float(p), int(c), float(v)) for s, p, c, v in zip(dist.symbols, x, codes, z)]
    _emit(_csv(("symbol", "frequency", "code", "reconstruction"), rows, [f"method={a.method} bits={a.bits} decode={a.decode} K={dist.K}"]), a.out)


def cmd_eval(a):
    if a.trials < 1:
        raise UsageError("--trials must be at least 1")
    cfg = ExperimentConfig(
        methods=a.methods,
        K=a.K,
        bits=a.bits,
        decode=a.decode,
        trials=a.trials,
        seed=a.seed,
        datasets=a.dataset,
        kmer_k=a.kmer_k,
        out=a.out,
        constants_cache=a.constants_cache,
    )
    reports, constants = run(cfg)
    _emit(format_csv(cfg, reports, constants), a.out)


def cmd_constants(a):
    lines = [solve_maximin_constants(k).to_record() + "\n" for k in a.K]
    _emit("".join(lines), a.out)


def cmd_worstcase(a):
    rows = []
    for K in a.K:
        for b in a.bits:
            N = 1 << b
            for m in a.methods:
                if m not in ("minimax", "approx_minimax", "power"):
                    raise UsageError(f"no worst-case bound for method {m!r}")
                bound = worstcase_bound(m, K, N)
                q = Quantizer(default_compander(m, K), N)
                res = adversarial_search(q, K, a.budget, np.random.default_rng([a.seed, K, b]))
                value = bound.value
                if m == "power" and bound.simplified is not None:
                    value = bound.simplified
                ratio = res.achieved / value if bound.valid else math.nan
                rows.append((m, K, N, value, res.achieved, ratio))
    _emit(_csv(WORSTCASE_FIELDS, rows), a.out)


def cmd_distill(a):
    from .distill import JointDistribution, brute_force_distiller, brute_force_quantizer, degrading_cost_bounds

    rows = []
    for K in a.K:
        for l2 in a.log2_M:
            d = degrading_cost_bounds(K, log_M=l2 * math.log(2))
            rows.append((K, l2, d.compander, d.scalar, d.covering, d.best))
    text = _csv(("K", "log2_M", "compander", "scalar_1268", "covering_800", "best"), rows)
    rng = np.random.default_rng(a.seed)
    demo = []
    for i in range(a.demo):
        j = JointDistribution(rng.dirichlet(np.ones(15)).reshape(3, 5))
        _, dl = brute_force_distiller(j, 2)
        _, ql = brute_force_quantizer(j, 2)
        demo.append((i, dl, ql, abs(dl - ql)))
    if demo:
        text += "\n" + _csv(("instance", "distiller_loss", "quantizer_loss", "abs_diff"), demo)
    _emit(text, a.out)


def cmd_convergence(a):
    rows = []
    for K in a.K:
        p = dirichlet_marginal(K, 1.0)
        for m in a.methods:
            q = make_quantizer(m, K, 1)
            f = q.compander
            limit = asymptotic_loss(p, f)
            Ns = [1 << b for b in a.bits]
            for N, v in zip(Ns, convergence_probe(p, f, Ns)):
                rows.append((m, K, N, float(v), limit, float(v) / limit))
    _emit(_csv(("method", "K", "N", "N2_loss", "limit", "ratio"), rows), a.out)


def cmd_badprior(a):
    if len(a.K) != 1:
        raise UsageError("badprior takes one K")
    res = badprior_study(a.K[0], a.bits, a.methods, a.trials, a.seed)
    rows, comments = [], [f"seed={a.seed}"]
    for r in res:
        comments.append(f"fit {r.method}: slope={r.slope!r} se={r.slope_se!r} t={r.t!r}")
        for N, v, s in zip(r.Ns, r.scaled, r.scaled_se):
            rows.append((r.method, r.K, N, v, s))
    _emit(_csv(("method", "K", "N", "raw_N2", "stderr"), rows, comments), a.out)


def cmd_power_sweep(a):
    if a.dataset:
        dist = load_dataset(a.dataset, a.kmer_k)
        x, K = dist.probabilities, dist.K
    else:
        K = a.K[0]
        from .datasets import sample_uniform_simplex

        x = sample_uniform_simplex(K, np.random.default_rng(a.seed))
    s_opt = 1.0 / math.log(K)
    grid = a.s or list(s_opt * np.geomspace(0.25, 4.0, 17))
    rows = []
    for b in a.bits:
        for s, nats in power_sweep(x, b, grid):
            rows.append((b, s, nats, nats / (K * math.log(2))))
    _emit(_csv(("b", "s", "nats", "bits_per_entry"), rows, [f"K={K} inverse_log_K={s_opt!r}"]), a.out)


COMMANDS = {
    "quantize": cmd_quantize,
    "eval": cmd_eval,
    "constants": cmd_constants,
    "worstcase": cmd_worstcase,
    "distill": cmd_distill,
    "convergence": cmd_convergence,
    "badprior": cmd_badprior,
    "power-sweep": cmd_power_sweep,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ParameterError) as exc:
        print(f"klcompand {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KLCompandError, OSError) as exc:
        print(f"klcompand {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
