"""Command-line front end: ``stream-sssp {gen,sssp,sampler-test,sparsifier-test,bench}``.

Exit codes: 0 on success, 2 on invalid arguments or input, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from . import experiments as ex
from . import hard_instances as hi
from .derand import derandomized_sssp
from .sssp import METRIC_COLUMNS, Config, approx_sssp, approximation_ratio
from .stream_core import (StreamError, StreamMode, materialize_final_graph, open_stream,
                          write_stream)
from .workloads import budget_density, dynamic_stream, random_connected_graph, shuffled_stream

log = logging.getLogger("stream_sssp")


class UsageError(Exception):
    """Bad flags or unusable input (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def worker_count() -> int:
    raw = os.environ.get("STREAM_SSSP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"STREAM_SSSP_THREADS must be an integer, got {raw!r}") from None


def _fan_out(fn, jobs):
    """Map ``fn`` over ``jobs`` (results kept in job order)."""
    jobs = list(jobs)
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _write_csv(rows: list[dict], columns, out) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(buf.getvalue(), encoding="utf-8")


def _eps(text: str) -> float:
    x = float(text)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return x


def _positive(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stream-sssp", description="Multi-pass streaming approximate SSSP toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a stream file (random or hard instance)")
    g.add_argument("--hard", choices=["orppc", "ppc", "random"], default="random")
    g.add_argument("--n", type=_positive, required=True, help="vertex count (hard: target size)")
    g.add_argument("--m", type=int, help="edge count for random graphs")
    g.add_argument("--max-weight", type=_positive, default=100)
    g.add_argument("--dynamic", action="store_true", help="random graph as a turnstile stream")
    g.add_argument("--b", type=int, choices=[0, 1], default=0)
    g.add_argument("--p", type=int, default=2, help="pass parameter for hard instances")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--t", type=_positive, help="override the number of PPC copies")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=".")
    g.add_argument("--name", default="graph")

    s = sub.add_parser("sssp", help="run the streaming algorithm on a stream file")
    s.add_argument("--input", required=True)
    s.add_argument("--source", type=int, default=0)
    s.add_argument("--eps", type=_eps, default=0.25)
    s.add_argument("--k", type=_positive, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=["auto", "ins", "dyn"], default="auto")
    s.add_argument("--deterministic", action="store_true",
                   help="use the enumerated sparsifier pipeline (micro graphs only)")
    s.add_argument("--verify", action="store_true", help="fill max_ratio via Dijkstra")
    s.add_argument("--run-id", default="")
    s.add_argument("--output", default="-", help="CSV path ('-' for stdout)")
    s.add_argument("--tree-output", help="write the tree as 'vertex parent dist' lines")

    st = sub.add_parser("sampler-test", help="l1 sampler distribution and linearity check")
    st.add_argument("--dim", type=_positive, default=1000)
    st.add_argument("--support", type=_positive, default=300)
    st.add_argument("--trials", type=_positive, default=20000)
    st.add_argument("--eps", type=_eps, default=0.1)
    st.add_argument("--delta", type=_eps, default=0.1)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--output", default="-")

    sp = sub.add_parser("sparsifier-test", help="exhaustive verification of sampled sparsifiers")
    sp.add_argument("--n", type=_positive, default=6)
    sp.add_argument("--m", type=_positive, default=12)
    sp.add_argument("--graphs", type=_positive, default=4)
    sp.add_argument("--seeds", type=_positive, default=2500)
    sp.add_argument("--eps", type=_eps, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", default="-")

    b = sub.add_parser("bench", help="random-graph benchmark sweep, one CSV row per run")
    b.add_argument("--n", type=_positive, nargs="+", default=[64, 256])
    b.add_argument("--k", type=_positive, default=2)
    b.add_argument("--eps", type=_eps, default=0.5)
    b.add_argument("--density", type=float, default=1 / 32,
                   help="edges = density * (k/eps) n^(1+1/k) log2 n")
    b.add_argument("--seeds", type=_positive, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-weight", type=_positive, default=100)
    b.add_argument("--output", default="-")
    return p


# -- subcommands ---------------------------------------------------------------

def cmd_gen(a) -> int:
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"kind": a.hard, "seed": a.seed}
    if a.hard == "random":
        m = a.m if a.m is not None else 4 * a.n
        g = random_connected_graph(a.n, m, a.seed, max_weight=a.max_weight)
        if a.dynamic:
            stream, final = dynamic_stream(g, a.seed + 1, max_weight=a.max_weight)
            meta.update(n=a.n, updates=len(stream), final_edges=final.m, mode="dyn")
        else:
            stream = shuffled_stream(g, a.seed + 1)
            meta.update(n=a.n, m=g.m, mode="ins")
    else:
        try:
            lp = hi.lemma_params(a.n, a.p, a.alpha)
        except hi.InstanceError as e:
            raise UsageError(str(e)) from None
        t = 1 if a.hard == "ppc" else (a.t or lp.t)
        inst = hi.sample_or_ppc(a.b, t, lp.d, lp.w, a.seed)
        g = hi.collection_graph(inst)
        stream = hi.to_stream(g, a.seed)
        meta.update(inst.metadata())
        meta.update(n=g.n, m=g.m, p=a.p, alpha=a.alpha, t_exact=lp.t_exact,
                    w_exact=lp.w_exact, rounding=lp.rounding,
                    source=hi.vertex_id(1, 1, lp.w), target=hi.vertex_id(2 * lp.d, 1, lp.w))
    path = out / f"{a.name}.stream"
    write_stream(path, stream)
    (out / f"{a.name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    log.info("wrote %s", path)
    return 0


def _write_tree(path: str, tree) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v, (par, dist) in enumerate(zip(tree.parent.tolist(), tree.dist.tolist())):
            fh.write(f"{v} {par} {dist}\n")


def cmd_sssp(a) -> int:
    mode = None if a.mode == "auto" else a.mode
    try:
        stream = open_stream(a.input, mode)
    except (OSError, StreamError) as e:
        raise UsageError(str(e)) from None
    cfg = Config(k=a.k, eps=a.eps, seed=a.seed, source=a.source)
    try:
        cfg.validate(stream.n)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if a.deterministic:
        if stream.mode is StreamMode.DYNAMIC:
            raise UsageError("--deterministic needs an insertion-only stream")
        tree, metrics = derandomized_sssp(stream, cfg, run_id=a.run_id)
    else:
        tree, metrics = approx_sssp(stream, cfg, run_id=a.run_id)
    if a.verify:
        g = materialize_final_graph(stream)
        metrics.max_ratio = approximation_ratio(tree, g)
    _write_csv([metrics.row()], METRIC_COLUMNS, a.output)
    if a.tree_output:
        _write_tree(a.tree_output, tree)
    return 0


def cmd_sampler(a) -> int:
    if a.support > a.dim:
        raise UsageError("--support cannot exceed --dim")
    r = ex.sampler_experiment(a.dim, a.support, a.trials, a.eps, a.delta, a.seed)
    row = r.row()
    _write_csv([row], row.keys(), a.output)
    return 0 if (r.tv_ok and r.fail_ok and r.linear) else 1


def cmd_sparsifier(a) -> int:
    if a.m > 12:
        raise UsageError("exhaustive verification is limited to 12 edges here")
    if a.m < a.n - 1 or a.m > a.n * (a.n - 1) // 2:
        raise UsageError("--m must allow a connected simple graph on --n vertices")
    r = ex.sparsifier_experiment(a.n, a.m, a.graphs, a.seeds, a.eps, a.seed)
    row = r.row()
    _write_csv([row], row.keys(), a.output)
    return 0 if r.pass_rate >= 0.99 else 1


def _bench_job(job):
    n, k, eps, density, max_weight, seed = job
    g = random_connected_graph(n, budget_density(n, k, eps, density), seed, max_weight=max_weight)
    stream = shuffled_stream(g, seed + 1)
    tree, m = approx_sssp(stream, Config(k=k, eps=eps, seed=seed), run_id=f"n{n}-s{seed}")
    m.max_ratio = approximation_ratio(tree, g)
    return m.row()


def cmd_bench(a) -> int:
    jobs = [(n, a.k, a.eps, a.density, a.max_weight, a.seed + i)
            for n in a.n for i in range(a.seeds)]
    rows = _fan_out(_bench_job, jobs)
    _write_csv(rows, METRIC_COLUMNS, a.output)
    return 0


COMMANDS = {"gen": cmd_gen, "sssp": cmd_sssp, "sampler-test": cmd_sampler,
            "sparsifier-test": cmd_sparsifier, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[a.cmd](a)
    except UsageError as e:
        print(f"stream-sssp {a.cmd}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - report and map to exit code 1
        log.debug("failure", exc_info=True)
        print(f"stream-sssp {a.cmd}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
