"""The shared correctness suite: 500 generated instances, fixed by one seed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from detmpc.config import RunConfig

DELTAS = ("1/2", "1/4", "1/8")


@dataclass(frozen=True)
class Instance:
    name: str
    kind: str
    params: dict
    gen_seed: int
    run: RunConfig


def _params(kind: str, rng: np.random.Generator) -> dict:
    big = rng.random() < 0.06
    if kind == "gnp":
        n = int(rng.integers(400, 2001)) if big else int(rng.integers(2, 100))
        return {"n": n, "p": round(float(rng.uniform(1.0, 6.0)) / max(n, 1), 6) if big else round(float(rng.uniform(0.02, 0.25)), 3)}
    if kind == "random_regular":
        d = int(rng.choice([3, 4]))
        n = 2 * int(rng.integers(200, 1000)) if big else 2 * int(rng.integers(3, 60))
        return {"n": n, "d": d}
    if kind == "grid":
        return {"rows": int(rng.integers(1, 40 if big else 12)), "cols": int(rng.integers(1, 40 if big else 12))}
    if kind == "tree":
        return {"n": int(rng.integers(1000, 2001)) if big else int(rng.integers(1, 150))}
    if kind == "star":
        return {"n": int(rng.integers(2, 300))}
    if kind == "clique":
        return {"n": int(rng.integers(1, 30))}
    if kind == "disjoint_edges":
        return {"k": int(rng.integers(0, 1000 if big else 60))}
    if kind == "blowup":
        return {"n": int(rng.integers(2, 12)), "p": round(float(rng.uniform(0.2, 0.8)), 3), "t": int(rng.integers(1, 6))}
    raise AssertionError(kind)


# words per machine: small machines only where every ball stays small
SPACES = {"random_regular": (1 << 10, 1 << 12, 1 << 16), "grid": (1 << 10, 1 << 12, 1 << 16),
          "tree": (1 << 12, 1 << 16), "disjoint_edges": (1 << 10, 1 << 12, 1 << 16), "gnp": (1 << 16, 1 << 18),
          "star": (1 << 18,), "clique": (1 << 16, 1 << 18), "blowup": (1 << 16, 1 << 18)}

KIND_WEIGHTS = {"gnp": 0.35, "random_regular": 0.12, "grid": 0.1, "tree": 0.12, "star": 0.07, "clique": 0.08,
                "disjoint_edges": 0.06, "blowup": 0.1}


def correctness_suite(size: int = 500, seed: int = 2024) -> list[Instance]:
    rng = np.random.default_rng(seed)
    kinds = list(KIND_WEIGHTS)
    w = np.array([KIND_WEIGHTS[k] for k in kinds])
    out = []
    for i in range(size):
        kind = kinds[int(rng.choice(len(kinds), p=w / w.sum()))]
        params = _params(kind, rng)
        delta = DELTAS[int(rng.integers(len(DELTAS)))]
        space = int(rng.choice(SPACES[kind]))
        out.append(Instance(f"{i:03d}-{kind}", kind, params, int(rng.integers(1 << 30)),
                            RunConfig(delta=delta, space=space, sequence_budget=1 << 16)))
    return out


@dataclass
class RunRecord:
    """What the acceptance checks need from one (instance, algorithm) run."""
    instance: Instance
    algorithm: str
    ok: bool
    solution: str
    certificates: str
    holds: bool
    lemma_checks: list
    heavy_rows: list  # (sumBd, edges) per iteration of the sparsification routes
    route: str


def run_suite(instances: list[Instance], workers: int = 1) -> list[RunRecord]:
    from detmpc.bench import ALGORITHMS, ExperimentConfig, run_experiment

    out = []
    for inst in instances:
        run = inst.run.with_(workers=workers)
        for alg in ALGORITHMS:
            res = run_experiment(ExperimentConfig(alg, kind=inst.kind, params=inst.params, gen_seed=inst.gen_seed, run=run))
            r = res.result
            rows = [(row["sumBd"], row["edges"]) for row in getattr(r, "metrics", []) if "sumBd" in row]
            out.append(RunRecord(inst, alg, res.ok, res.solution, res.certificates, res.summary["certificates_hold"],
                                 list(getattr(r, "lemma_checks", [])), rows, res.summary.get("route", "")))
    return out
