"""Training-epoch throughput: compiled kernel vs pure-Python backend.

Builds a synthetic graph with all three rule forms, mines and grounds it,
then times identical epochs through both backends.  The python backend is
run on a subsample when the full set would take too long; rates are
samples/second either way.

Usage:
    python benchmarks/bench_epoch.py [--entities 2000] [--triples 20000]
                                     [--dim 50] [--epochs 3] [--model transe]
"""

import argparse
import time

import numpy as np

from rulekge import engine, mining, models, training
from rulekge.encoding import build_pool
from rulekge.kg import Triple, Vocabulary, build_graph
from rulekge.models import ModelKind, Norm
from rulekge.rng import SplitMix64
from rulekge.training import encode_training_set, make_training_set


def synthetic_graph(rng, n_entities, n_triples):
    rel_labels = ["/x/a/p", "/x/x/q", "fwd", "bwd", "hop1", "hop2", "direct", "noise"]
    triples = set()
    quarter = n_triples // 4
    for _ in range(quarter // 2):
        h, t = (int(x) for x in rng.integers(0, n_entities, 2))
        if h != t:
            triples.add((h, 0, t))
            triples.add((h, 1, t))
    for _ in range(quarter // 2):
        h, t = (int(x) for x in rng.integers(0, n_entities, 2))
        if h != t:
            triples.add((h, 2, t))
            triples.add((t, 3, h))
    for _ in range(quarter // 3):
        a, b, c = (int(x) for x in rng.integers(0, n_entities, 3))
        if a != b and b != c:
            triples.add((a, 4, b))
            triples.add((b, 5, c))
            triples.add((a, 6, c))
    while len(triples) < n_triples:
        h, t = (int(x) for x in rng.integers(0, n_entities, 2))
        triples.add((h, 7, t))
    entities = Vocabulary([f"e{i}" for i in range(n_entities)])
    relations = Vocabulary(rel_labels)
    return build_graph(sorted(Triple(*t) for t in triples), entities, relations)


def run(backend, params, samples, pool, norm, epochs, lr, threads=1):
    work = params.copy()
    rng = SplitMix64(7)
    started = time.perf_counter()
    losses = []
    for _ in range(epochs):
        losses.append(
            engine.run_epoch(
                work, samples, pool, 1.0, lr, norm, rng,
                backend=backend, threads=threads,
            )
        )
        training.project_norms(work)
    elapsed = time.perf_counter() - started
    return elapsed, losses


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--entities", type=int, default=2000)
    parser.add_argument("--triples", type=int, default=20000)
    parser.add_argument("--dim", type=int, default=50)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--model", choices=["transe", "transh", "transr"], default="transe")
    parser.add_argument("--python-cap", type=int, default=4000,
                        help="samples for the python backend (it is slow)")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    rng = np.random.default_rng(11)
    graph = synthetic_graph(rng, args.entities, args.triples)
    result = mining.mine_rules(graph, {t: 0.4 for t in mining.RuleType})
    grounds = mining.ground(result.rules, graph)
    kind = ModelKind(args.model)
    lr = 0.002 if kind is ModelKind.TRANSR else 0.02
    params = models.init_params(graph, args.dim, kind, seed=5)
    pool = build_pool(
        sorted(graph.triples), grounds, result.rules,
        graph.n_entities, graph.n_relations,
    )
    samples = encode_training_set(make_training_set(graph, grounds), pool, params)
    print(
        f"graph: {len(graph)} triples, {len(grounds)} ground rules, "
        f"{samples.shape[0]} samples, dim {args.dim}, model {kind.value}"
    )

    n_py = min(args.python_cap, samples.shape[0])
    t_py, _ = run("python", params, samples[:n_py], pool, Norm.L1, args.epochs, lr)
    rate_py = n_py * args.epochs / t_py
    print(f"python   backend: {rate_py:>12,.0f} samples/s ({t_py:.2f}s on {n_py} samples)")

    if engine.compiled_available():
        t_cy, losses = run("compiled", params, samples, pool, Norm.L1, args.epochs, lr)
        rate_cy = samples.shape[0] * args.epochs / t_cy
        print(
            f"compiled backend: {rate_cy:>12,.0f} samples/s "
            f"({t_cy:.2f}s on {samples.shape[0]} samples)"
        )
        print(f"speedup: {rate_cy / rate_py:,.0f}x")
        if args.threads > 1:
            t_mt, _ = run(
                "compiled", params, samples, pool, Norm.L1, args.epochs, lr,
                threads=args.threads,
            )
            rate_mt = samples.shape[0] * args.epochs / t_mt
            print(
                f"compiled backend ({args.threads} threads): {rate_mt:>12,.0f} samples/s "
                f"({rate_mt / rate_cy:.2f}x over single-threaded)"
            )
        print(f"final mean loss (compiled): {losses[-1]:.4f}")
    else:
        print("compiled backend not built; skipping comparison")


if __name__ == "__main__":
    main()
