# Copyright 2026 The GGPI Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the ggpi command line: every subcommand runs, its
outputs validate against docs/schemas, and runs replay under a fixed seed.

usage: cli_test.py <ggpi executable> <source dir> <scratch dir>
"""

import csv
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
import referencing

CLI = pathlib.Path(sys.argv[1])
SCHEMAS = pathlib.Path(sys.argv[2]) / "docs" / "schemas"
WORK = pathlib.Path(sys.argv[3])

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def load_schemas():
    resources = []
    schemas = {}
    for path in sorted(SCHEMAS.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        schemas[path.name.removesuffix(".schema.json")] = doc
        resources.append((doc["$id"], referencing.Resource.from_contents(doc)))
    return schemas, referencing.Registry().with_resources(resources)


SCHEMA, REGISTRY = load_schemas()


def validate(doc, name, what):
    validator = jsonschema.Draft202012Validator(SCHEMA[name], registry=REGISTRY)
    errors = list(validator.iter_errors(doc))
    check(not errors, f"{what} matches {name} schema" + (f": {errors[0].message}" if errors else ""))


def typed(value):
    if value in ("true", "false"):
        return value == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def validate_csv(path, name):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    check(header == SCHEMA[name]["x-columns"], f"{path.name} header matches {name}")
    validator = jsonschema.Draft202012Validator(SCHEMA[name], registry=REGISTRY)
    bad = [r for r in body if list(validator.iter_errors({k: typed(v) for k, v in zip(header, r)}))]
    check(not bad, f"{path.name}: all {len(body)} rows match {name}" + (f" (first bad row {bad[0]})" if bad else ""))
    return [{k: typed(v) for k, v in zip(header, r)} for r in body]


def run(*args, expect=0):
    proc = subprocess.run([str(CLI), *map(str, args)], capture_output=True, text=True)
    check(proc.returncode == expect if expect is not None else proc.returncode != 0,
          f"ggpi {' '.join(map(str, args[:1]))} exit code {proc.returncode}")
    if proc.returncode != 0 and expect == 0:
        print(proc.stdout, proc.stderr)
    return proc


def read(path):
    return json.loads(pathlib.Path(path).read_text())


def out(name):
    return WORK / name


def main():
    shutil.rmtree(WORK, ignore_errors=True)
    WORK.mkdir(parents=True)

    # export + file formats
    for env in ("four-rooms", "chain", "tree", "fixture1", "random"):
        gamma = "0.95" if env == "chain" else "0.9"
        run("export", "--env", env, "--gamma", gamma, "--seed", 5, "--out", out("export_" + env))
        validate(read(out("export_" + env) / "mdp.json"), "mdp", f"{env} mdp.json")
        validate(read(out("export_" + env) / "policies.json"), "policies", f"{env} policies.json")
        validate(read(out("export_" + env) / "config.json"), "config", f"{env} config.json")

    # four-rooms
    run("four-rooms", "--out", out("four_rooms"))
    rows = validate_csv(out("four_rooms") / "coverage.csv", "coverage_row")
    check(len(rows) == 104 * 3, "coverage.csv has n_states x 3 rows")
    summary = read(out("four_rooms") / "summary.json")
    validate(summary, "coverage_summary", "four-rooms summary.json")
    counts = [d["optimal_count"] for d in summary["depths"]]
    check(counts[0] < counts[1] < counts[2], f"coverage strictly increases with depth {counts}")
    check(all((out("four_rooms") / f"map_depth{d}.txt").exists() for d in (1, 2, 3)), "ASCII maps written")
    validate(read(out("four_rooms") / "config.json"), "config", "four-rooms config.json")

    # policy-iter on a small MDP, run twice for replay
    mdp = out("export_random") / "mdp.json"
    for tag in ("a", "b"):
        run("policy-iter", "--mdp", mdp, "--seeds", 2, "--depth", 2, "--samples", 50, "--iters", 8,
            "--seed", 3, "--out", out("pi_" + tag))
    validate_csv(out("pi_a") / "sweep.csv", "sweep_row")
    validate(read(out("pi_a") / "summary.json"), "sweep_summary", "policy-iter summary.json")
    validate(read(out("pi_a") / "runs.json"), "pi_runs", "policy-iter runs.json")
    check((out("pi_a") / "sweep.csv").read_bytes() == (out("pi_b") / "sweep.csv").read_bytes(),
          "policy-iter replays under a fixed seed")

    # exact mode: depth 1 reaches an optimal policy
    run("policy-iter", "--mdp", mdp, "--seeds", 1, "--depth", 1, "--samples", 0, "--init", "random",
        "--out", out("pi_exact"))
    exact_rows = validate_csv(out("pi_exact") / "sweep.csv", "sweep_row")
    check(all(r["reached_optimal"] and r["total_samples"] == 0 for r in exact_rows), "exact policy iteration is optimal")

    # cetd
    run("cetd", "--iters", 2000, "--eval-every", 500, "--learner", "all", "--out", out("cetd"))
    traces = sorted(out("cetd").glob("trace_*.csv"))
    check(len(traces) == 6, "one trace per fixture and learner")
    for t in traces:
        trace_rows = validate_csv(t, "trace_row")
        check(len(trace_rows) == 5, f"{t.name} has one row per evaluation")
    for s in sorted(out("cetd").glob("simplex_*.csv")):
        validate_csv(s, "simplex_row")
    validate(read(out("cetd") / "summary.json"), "cetd_summary", "cetd summary.json")

    # counterexamples
    run("counterexamples", "--out", out("counterexamples"))
    report = read(out("counterexamples") / "counterexamples.json")
    validate(report, "counterexamples", "counterexamples.json")
    check(report["all_pass"], "all counterexample values reproduce")

    # eval-gsp
    pols = out("export_random") / "policies.json"
    run("eval-gsp", "--mdp", mdp, "--policies", pols, "--gsp", "p0->p1->p2", "--samples", 20000, "--alpha", 0.3,
        "--save-ghms", "--out", out("eval"))
    ev = read(out("eval") / "eval_gsp.json")
    validate(ev, "eval_gsp", "eval_gsp.json")
    z = [abs(e["mean"] - e["exact"]) / e["stderr"] for e in ev["estimates"] if e["stderr"] > 0]
    check(sum(v > 3 for v in z) <= max(1, len(z) // 20), f"estimates within 3 SE of exact ({len(z)} probes)")
    for ghm in sorted(out("eval").glob("ghm_*.json")):
        validate(read(ghm), "ghm", ghm.name)
    run("eval-gsp", "--mdp", mdp, "--policies", pols, "--gsp", "p0->->p1", "--out", out("eval_bad"), expect=None)
    run("eval-gsp", "--mdp", mdp, "--policies", pols, "--gsp", "nosuch", "--out", out("eval_bad"), expect=None)

    # transfer
    run("transfer", "--samples", 0, "--episodes", 1, "--goals", "9,9;0,10", "--out", out("transfer"))
    tr_rows = validate_csv(out("transfer") / "transfer.csv", "transfer_row")
    validate(read(out("transfer") / "transfer.json"), "transfer", "transfer.json")
    check(all(r["reached_goal"] for r in tr_rows if r["depth"] == 3), "depth-3 transfer reaches every goal")
    check(read(out("transfer") / "transfer.json")["ghm_computations"] == 8, "models computed once for all goals")

    # config precedence: flags > file > defaults
    cfg = WORK / "cfg.json"
    cfg.write_text(json.dumps({"gamma": 0.5, "samples": 7, "episodes": 1, "goals": "9,9"}))
    run("transfer", "--config", cfg, "--gamma", 0.8, "--depth", 1, "--out", out("precedence"))
    eff = read(out("precedence") / "config.json")
    check(eff["gamma"] == 0.8 and eff["samples"] == 7 and eff["alpha"] == 0.1,
          "flag beats config file, config file beats default")
    cfg.write_text(json.dumps({"bogus": 1}))
    run("transfer", "--config", cfg, "--out", out("bad_cfg"), expect=None)

    # range validation
    run("four-rooms", "--gamma", 1.5, "--out", out("bad"), expect=None)
    run("policy-iter", "--alpha", 0, "--out", out("bad"), expect=None)
    run("cetd", "--fixture", "3", "--out", out("bad"), expect=None)

    print(f"\n{len(failures)} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
