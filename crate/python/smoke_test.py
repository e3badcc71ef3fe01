"""Smoke test for the pyballchain extension.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml`, or
`PYO3_BUILD_EXTENSION_MODULE=1 cargo build -p pyballchain --release` and copy
`target/release/libpyballchain.so` to `pyballchain.so` on PYTHONPATH.
"""

import json
import math
import tempfile

import pyballchain as bc


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL {what}")
    print(f"ok   {what}")


def main():
    names = bc.scenario_presets()
    check("aligned" in names and "experiment_down" in names, "presets listed")

    aligned = bc.Scenario.preset("aligned")
    (r,) = aligned.solve()
    xs = [p[0] for p in r.positions_mm]
    check(r.converged and len(xs) == 10, "aligned chain converges with 10 balls")
    check(all(abs(x - 0.9 * k) < 1e-9 for k, x in enumerate(xs)), "aligned chain is straight at 0.9 mm pitch")
    check(r.energy["total"] < 0.0, "energy dict exposed")

    same = bc.Scenario.from_json(aligned.to_json())
    check(same == aligned, "JSON round trip")

    try:
        bc.Scenario.from_json('{"balls": 3}')
    except ValueError as e:
        check("design" in str(e), "missing key raises ValueError")
    else:
        raise SystemExit("FAIL missing key accepted")

    down = bc.Scenario.preset("experiment_down").solve()
    tips = [res.tip_mm[2] for res in down]
    check(len(down) == 4 and all(res.converged for res in down), "experiment sweep converges")
    check(min(tips) < -10.0, "chain bends toward the magnet")

    pos, m = bc.magnet_pose_from_psi(90.0)
    check(pos[2] < 0.0 and abs(math.hypot(*m) - 204.63) < 0.01, "magnet pose below the chain")
    b = bc.dipole_field((0.1, 0.0, 0.0), (1.0, 0.0, 0.0))
    check(abs(b[0] - 2e-7 / 1e-3) < 1e-12, "axial dipole field")
    check(abs(bc.polygon_area([(0, 0), (1, 0), (1, 1), (0, 1)]) - 1.0) < 1e-12, "polygon area")

    s = bc.NavigationSession("turn90")
    check(s.balls == 1, "session starts with one ball")
    entry = s.advance(3.175)
    check(entry["balls"] == 2 and s.balls == 2, "advance inserts a ball")
    s.set_field(90.0)
    s.step(json.dumps({"command": "retract", "length_mm": 3.175}))
    check(s.balls == 1, "retract removes a ball")
    check(len(s.log_jsonl().splitlines()) == 4, "log has one line per step")

    with tempfile.TemporaryDirectory() as out:
        files = aligned.run_solve(out)
        check(any(f.endswith("aligned_shape.csv") for f in files), "run_solve writes files")

    checks = bc.verify(0, 3)
    check(all(passed for _, passed, _ in checks), f"{len(checks)} self-checks pass")
    print("smoke test passed")


if __name__ == "__main__":
    main()
