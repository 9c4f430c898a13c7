"""Show which MIS route the dispatcher picks on a few graph shapes, with rounds and peak load."""

from detmpc import RunConfig, dispatch_mis, generate_graph, verify_mis

cases = [("grid", {"rows": 20, "cols": 20}), ("random_regular", {"n": 400, "d": 3}),
         ("star", {"n": 400}), ("gnp", {"n": 400, "p": 0.05})]
cfg = RunConfig(delta="1/4", space=1 << 16)
for kind, params in cases:
    g = generate_graph(kind, params, gen_seed=1)
    res = dispatch_mis(g, cfg)
    print(f"{kind:15s} n={g.node_count:4d} m={g.m:5d} route={res.extra['route']:28s} "
          f"|I|={len(res.nodes):4d} rounds={res.cluster.rounds:4d} peak={res.cluster.peak_load:6d} "
          f"{verify_mis(g, res.nodes).line()}")
