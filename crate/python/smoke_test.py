#!/usr/bin/env python3
"""End-to-end exercise of the psample_py extension module.

Build the module first, then run this script:

    cargo build -p psample-py --release
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        so = ROOT / "target" / profile / "libpsample_py.so"
        if so.exists():
            tmp = Path(tempfile.mkdtemp(prefix="psample_py_"))
            shutil.copy2(so, tmp / "psample_py.so")
            sys.path.insert(0, str(tmp))
            import psample_py

            return psample_py
    sys.exit("libpsample_py.so not found; run `cargo build -p psample-py --release` first")


ps = load_module()

# Synthesis and CSV round trip.
nodes = ps.Population.synth_nodes(2000, 5)
assert len(nodes) == 2000 and nodes.kind() == "node"
links = ps.Population.synth_links(nodes, 1500, 5)
assert len(links) == 1500 and links.kind() == "link"
with tempfile.TemporaryDirectory() as d:
    path = str(Path(d) / "nodes.csv")
    nodes.write_csv(path)
    again = ps.Population.read_csv(path)
    assert again.ids() == nodes.ids()
    some = nodes.ids()[0]
    assert again.features(some) == nodes.features(some)

# Config JSON round trip.
cfg = json.loads(ps.default_config_json())
cfg["n_nodes"] = 500
cfg["seed"] = 9
small = ps.Population.synth_nodes_from_config(json.dumps(cfg))
assert len(small) == 500

# Master build, save, load.
master = ps.Master.build(nodes, "feature:fo", 11)
assert len(master) == 2000 and master.weight == "feature:fo" and not master.capped
with tempfile.TemporaryDirectory() as d:
    p = str(Path(d) / "master.json")
    master.save(p)
    again = ps.Master.load(p)
    assert again.checksum == master.checksum

# Playout, extension, and the prefix property.
s1 = master.sample(nodes, 300)
assert len(s1) == 300 and s1.z > 0 and not s1.exhausted
assert s1.mode == "predicate-limited"
s2 = master.extend(nodes, s1, 100)
fresh = master.sample(nodes, 400)
assert s2.to_json() == fresh.to_json()
assert fresh.ids()[:300] == s1.ids()

# Predicate playouts only contain matches; cost-limited mode is bounded.
pred = "fo>=3"
sp = master.sample(nodes, 120, pred)
assert all(f["fo"] >= 3 for _, _, _, f in sp.entries())
scl = master.sample_cost_limited(nodes, 50, pred)
assert scl.mode == "cost-limited" and len(scl) <= 50

# Restricting a sample matches estimating under the predicate.
whole = master.sample(nodes, 250)
assert math.isclose(whole.restrict(pred).subset_count(), whole.subset_count(pred))

# Exhaustive playouts are exact.
ex = master.sample(nodes, len(nodes))
assert ex.z == 0 and ex.exhausted
total_fo = sum(nodes.features(i)["fo"] for i in nodes.ids())
assert math.isclose(ex.subset_sum("fo"), total_fo, rel_tol=1e-9)
assert ex.subset_count() == len(nodes)

# Exhaustive curves coincide with the exact population curves.
est = ex.ordinary_cdf("fo")
tru = ps.true_cdf(nodes, "fo")
assert ps.ks_cdf(est, tru) == 0.0
em = ex.mass_distribution("fo", "fo")
tm = ps.true_mass(nodes, "fo", "fo")
assert ps.ks_mass(em, tm) == 0.0
assert all(t == e for t, e in ps.qq_curve(em, tm))
assert em.breakpoints == tm.breakpoints

# Sampled curves are sane; samples survive a JSON round trip.
sm = s1.mass_distribution("fo", "fo")
assert len(sm.breakpoints) == len(sm.points)
assert abs(sm.points[-1][1] - 1.0) < 1e-9
assert 0.0 <= ps.ks_mass(sm, tm) <= 1.0
round_trip = ps.Sample.from_json(s1.to_json())
assert round_trip.to_json() == s1.to_json()

# Evaluation tables: shaped, bounded, deterministic, addressable.
args = (nodes, ["uniform", "feature:fo"], ["fo"], [("fo", "fo")])
table = ps.run_eval(*args, runs=3, k=200, seed=42)
rows = table.rows()
assert len(rows) == 4
assert all(0.0 <= r[3] <= 1.0 for r in rows)
assert ps.run_eval(*args, runs=3, k=200, seed=42).rows() == rows
m = table.median("feature:fo", "fo", "fo")
assert ("feature:fo", "fo", "fo", m, 3) in rows
assert len(table.values("uniform", "fo")) == 3
assert "median_ks" in str(table)

# Errors surface as ValueError with the library's message.
for bad in (
    lambda: ps.Master.build(nodes, "feature:nope", 1),
    lambda: master.sample(nodes, 10, "fo >>< 1"),
    lambda: ps.Population.read_csv("/nonexistent/file.csv"),
):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

print("smoke test passed")
