"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Run directly (`python tests/test_acceptance.py`) or through pytest; either
way the summary lines are printed at the end.
"""

import itertools
import json
import os
import subprocess
import sys
import textwrap
import time

import pytest

from conftest import GOLDEN, ROOT, all_fixtures, clean_fixtures, fixture_path
from generators import random_graph, random_graph_with_envs, random_jobs
from ragraph import (
    PHI, DurationPolicy, PPCRef, backward, brute_force_plans, contention_report,
    environment_of, export_dot, export_json, format_graph, forward, import_json,
    linearizations, parse, parse_file, schedule, validate, verify_schedule,
)
from ragraph.planner import InfeasibleResourcesError
from ragraph.validator import CHECKS, run_checks

CRITERIA = {
    1: "fixture compiles, validates, exports; counts match manifest; < 1 s",
    2: "each mutant fails exactly its check; clean fixture has no findings",
    3: "environment persistence over 1000 random graphs",
    4: "backward/forward duality over 1000 random graphs",
    5: "linearizations = permutation oracle; list makespan within [opt, 2 opt]",
    6: "interjection arithmetic (breaking conservation, repeating instants)",
    7: ".rag and JSON round-trips",
    8: "plan/JSON/DOT byte-identical over 3 runs",
    9: "shared-pan evacuate-then-fill; dropping the order flips V007",
}

N_RANDOM = 1000


def _manifest():
    with open(os.path.join(GOLDEN, "english_breakfast.manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)


# 1

def test_criterion_1_fixture_compile():
    manifest = _manifest()
    t0 = time.perf_counter()
    graph = parse_file(fixture_path(manifest["fixture"]))
    v = validate(graph)
    text_json = export_json(v)
    text_dot = export_dot(v)
    elapsed = time.perf_counter() - t0

    assert (len(v.graph.nodes), len(v.graph.edges)) == (manifest["nodes"], manifest["edges"])
    assert sorted(v.proof) == sorted(CHECKS)
    assert list(v.warnings) == []
    assert sorted(v.graph.ids_of_kind("plugin")) == manifest["plugins"]
    assert backward(v, manifest["sink"]).ingredients == manifest["ingredients"]
    assert text_json and text_dot.startswith("digraph")
    assert elapsed < 1.0, f"took {elapsed:.3f} s"


# 2

def test_criterion_2_mutation_suite():
    mutant_dir = fixture_path("mutants")
    files = sorted(os.listdir(mutant_dir))
    caught = {}
    for f in files:
        code = f.split("_")[0].upper()
        diags = run_checks(parse_file(os.path.join(mutant_dir, f)))
        caught[code] = {d.code for d in diags}
    assert sorted(caught) == sorted(CHECKS), "every check needs a mutant"
    wrong = {code: found for code, found in caught.items() if found != {code}}
    assert not wrong, f"mutants not failing exactly their own check: {wrong}"
    graph = parse_file(fixture_path("english_breakfast.rag"))
    clean = list(graph.warnings) + run_checks(graph)
    assert clean == [], [d.render() for d in clean]


# 3

def _env_via_destination(graph, node_id, envs):
    dest = graph.nodes[node_id].payload.destination
    if isinstance(dest, PPCRef):
        return envs[dest.producing_node]
    return graph.environments[dest]


def test_criterion_3_environment_persistence():
    violations = []
    for seed in range(N_RANDOM):
        graph, built = random_graph_with_envs(seed)
        v = validate(graph)
        g = v.graph
        got = {n: environment_of(v, g.ppc_of(n)) for n in g.ids_of_kind("process", "transfer")}
        for root in g.ids_of_kind("ingredient"):
            got[root] = g.environments[g.nodes[root].environment] if g.nodes[root].environment else PHI
        for n in g.ids_of_kind("process"):
            placed = {got[i] for i in g.material_sources(n, "input")} - {PHI}
            expected = placed.pop() if placed else PHI
            if got[n] != expected or got[n] != built[n]:
                violations.append((seed, n, got[n], expected, built[n]))
        for n in g.ids_of_kind("transfer"):
            expected = _env_via_destination(g, n, got)
            if got[n] != expected or got[n] != built[n]:
                violations.append((seed, n, got[n], expected, built[n]))
    assert not violations, violations[:5]


# 4

def test_criterion_4_provenance_duality():
    mismatches = []
    checked = 0
    for seed in range(N_RANDOM):
        v = validate(random_graph(seed))
        g = v.graph
        roots = g.ids_of_kind("ingredient")
        reach = {r: forward(v, r) for r in roots}
        for p in g.ids_of_kind("process", "transfer", "plate"):
            leaves = set(backward(v, p).leaves)
            for r in roots:
                checked += 1
                if (r in leaves) != (p in reach[r]):
                    mismatches.append((seed, r, p))
    assert checked > N_RANDOM
    assert not mismatches, mismatches[:5]


# 5

def _permutation_orders(graph):
    nodes = sorted(graph.nodes)
    pairs = [(e.src, e.dst) for e in graph.edges if e.kind in ("material", "precedence") and e.src in graph.nodes]
    out = set()
    for perm in itertools.permutations(nodes):
        pos = {n: i for i, n in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in pairs):
            out.add(perm)
    return out


def _planner_instances():
    for seed in range(150):
        yield "jobs", seed, random_jobs(seed)
    for seed in range(150):
        yield "graph", seed, random_graph(10_000 + seed, max_nodes=8)


def test_criterion_5_planner_vs_oracle():
    policy = DurationPolicy(transfer_seconds=30)
    orders_checked = compared = 0
    problems = []
    for family, seed, graph in _planner_instances():
        v = validate(graph)
        if len(v.graph.nodes) <= 8:
            orders_checked += 1
            lin = {tuple(o) for o in linearizations(v)}
            if lin != _permutation_orders(v.graph):
                problems.append((family, seed, "linearizations"))
        for workers in (1, 2, 3):
            try:
                sched = schedule(v, workers, policy)
            except InfeasibleResourcesError:
                continue
            opt, witness = brute_force_plans(v, workers, policy)
            compared += 1
            if not opt <= sched.makespan_seconds <= 2 * opt:
                problems.append((family, seed, workers, sched.makespan_seconds, opt))
            if verify_schedule(v, sched, policy) or verify_schedule(v, witness, policy):
                problems.append((family, seed, workers, "verifier"))
    assert orders_checked >= 200
    assert compared >= 200
    assert not problems, problems[:5]


# 6

BREAKING = textwrap.dedent("""\
    recipe "breaking"
    lexicon techniques@^1.0
    env pot { container "pot"; location "stove" }
    ingredient stock { qty 1 l; in pot }
    ingredient salt { qty 1 tsp }
    process simmer_it { input stock; technique simmer; until 10 min }
    interject simmer_it at 40% breaking {
      transfer salt_in { from salt; to env pot; mode place }
    }
    """)

REPEATING = textwrap.dedent("""\
    recipe "repeating"
    lexicon techniques@^1.0
    env pot { container "pot"; location "stove" }
    ingredient stock { qty 1 l; in pot }
    ingredient water { qty 500 ml }
    process simmer_it { input stock; technique simmer; until 600 s }
    interject simmer_it at 2 min repeating every 2 min {
      transfer water_in { from water; to env pot; mode pour }
    }
    """)


def test_criterion_6_interjection_arithmetic():
    v = validate(parse(BREAKING))
    policy = DurationPolicy(transfer_seconds=45)
    sched = schedule(v, 1, policy)
    assert verify_schedule(v, sched, policy) == []
    segments = sched.of_node("simmer_it")
    assert len(segments) == 2
    assert sum(e.end - e.start for e in segments) == 600
    (pause,) = sched.of_node("salt_in")
    assert (pause.start - segments[0].start, pause.end - pause.start) == (240, 45)
    assert segments[-1].end - segments[0].start == 600 + 45

    v = validate(parse(REPEATING))
    sched = schedule(v, 2, DurationPolicy())
    (parent,) = sched.of_node("simmer_it")
    assert (parent.start, parent.end) == (0, 600)
    instants = sorted(e.start - parent.start for e in sched.of_node("water_in"))
    assert instants == [120, 240, 360, 480]


# 7

def test_criterion_7_round_trips():
    for name in all_fixtures() + [os.path.join("mutants", m) for m in sorted(os.listdir(fixture_path("mutants")))]:
        g = parse_file(fixture_path(name))
        text = format_graph(g)
        g2 = parse(text, temperatures=None)
        assert g.isomorphic(g2), name
        assert format_graph(g2) == text, name
    for name in clean_fixtures():
        v = validate(parse_file(fixture_path(name)))
        once = export_json(v)
        twice = export_json(validate(import_json(once, source_path=v.graph.source_path)))
        assert once == twice, name
    for seed in range(50):
        v = validate(random_graph(seed))
        assert v.graph.isomorphic(parse(format_graph(v.graph)))
        assert export_json(validate(import_json(export_json(v)))) == export_json(v)


# 8

RUNNER = textwrap.dedent("""\
    import hashlib, json, os, sys
    from ragraph import DurationPolicy, contention_report, export_dot, export_json, parse_file, schedule, validate
    out = {}
    for name in sys.argv[2:]:
        v = validate(parse_file(os.path.join(sys.argv[1], name)))
        plan = json.dumps({"schedule": schedule(v, 2, DurationPolicy()).to_dict(),
                           "contention": [c.to_dict() for c in contention_report(v)]},
                          sort_keys=True, ensure_ascii=False)
        out[name] = [hashlib.sha256(t.encode()).hexdigest() for t in (plan, export_json(v), export_dot(v))]
    print(json.dumps(out, sort_keys=True))
    """)


def test_criterion_8_determinism():
    names = clean_fixtures()
    runs = []
    for hashseed in ("1", "2", "3"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        proc = subprocess.run([sys.executable, "-c", RUNNER, os.path.join(ROOT, "fixtures"), *names],
                              capture_output=True, text=True, env=env, check=True)
        runs.append(proc.stdout)
    assert runs[0] == runs[1] == runs[2]
    assert sorted(json.loads(runs[0])) == names


# 9

def test_criterion_9_shared_pan():
    v = validate(parse_file(fixture_path("shared_pan.rag")))
    (pan,) = [c for c in contention_report(v) if c.names == ("pan_stove",)]
    moves = [(n, m) for n, m, _ in pan.sequence]
    i = moves.index(("sausages_out", "evacuate"))
    assert moves[i + 1] == ("bacon_in", "fill")
    assert ("sausages_out", "bacon_in") in pan.reuse
    assert "V007" in v.proof

    g = v.graph.copy()
    g.edges = [e for e in g.edges if not (e.kind == "precedence" and (e.src, e.dst) == ("sausages_out", "bacon_in"))]
    assert len(g.edges) == len(v.graph.edges) - 1
    assert {d.code for d in run_checks(g) if d.severity == "error"} == {"V007"}


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
