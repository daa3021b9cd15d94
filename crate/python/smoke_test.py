#!/usr/bin/env python3
"""Smoke test for the pwlab Python extension module.

Builds the extension if needed, loads it from the cargo target directory,
and exercises the main entry points at q = 3.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_or_build_extension() -> Path:
    candidates = [
        REPO / "target" / "release" / "libpwlab.so",
        REPO / "target" / "debug" / "libpwlab.so",
    ]
    for c in candidates:
        if c.exists():
            return c
    print("extension not built yet; running cargo build -p pwlab-py ...")
    subprocess.run(["cargo", "build", "-p", "pwlab-py"], cwd=REPO, check=True)
    path = REPO / "target" / "debug" / "libpwlab.so"
    if not path.exists():
        raise SystemExit("cargo build did not produce libpwlab.so")
    return path


def main() -> None:
    so = locate_or_build_extension()
    staging = Path(tempfile.mkdtemp(prefix="pwlab-py-"))
    shutil.copy(so, staging / "pwlab.so")
    sys.path.insert(0, str(staging))

    import pwlab

    # model
    gq = pwlab.build_gq(3)
    assert gq.points == 112 and gq.lines == 280, (gq.points, gq.lines)
    assert gq.order == (3, 9) and gq.sub_order == (3, 3)
    assert gq.sub_points == 40 and gq.sub_lines == 40
    assert gq.outer_points == 72
    print(f"model ok: {gq.points} points, {gq.lines} lines, order {gq.order}")

    # scheme and parameters
    scheme = pwlab.Scheme.build(3)
    assert scheme.size == 72 and scheme.classes == 4
    assert scheme.valencies() == [1, 20, 30, 20, 1]
    assert scheme.relation(0, 0) == 0
    assert scheme.relation(0, 1) == scheme.relation(1, 0)
    assert scheme.intersection_number(3, 3, 3) == 1
    assert scheme.intersection_number(2, 3, 3) == 6
    assert scheme.intersection_number(4, 2, 2) == 30
    assert scheme.multiplicities() == [1, 6, 20, 30, 15]
    assert scheme.krein_parameter(1, 1, 1) == "0/1"
    assert scheme.clique_count() == 240
    print(f"scheme ok: {scheme!r}")

    # save / load round trip
    path = staging / "scheme3.json"
    scheme.save(str(path))
    loaded = pwlab.Scheme.load(str(path))
    assert loaded.size == 72 and loaded.valencies() == [1, 20, 30, 20, 1]
    print("save/load ok")

    # triple system
    sol = pwlab.solve_triple(3, 3, 3, 3, krein=True, symmetry=True)
    assert sol["pinned"]["[1 3 3]"] == "0/1"
    assert sol["pinned"]["[2 3 3]"] == "0/1"
    assert sol["equations"] == 127
    print(f"triple system ok: {len(sol['pinned'])} pinned unknowns")

    # full pipeline
    passed, report_json = pwlab.pipeline(q=3)
    report = json.loads(report_json)
    assert passed and report["summary"] == "pass"
    assert len(report["records"]) > 30
    print(f"pipeline ok: {len(report['records'])} checks passed")

    # stage selection
    passed, report_json = pwlab.pipeline(q=3, checks=["params"])
    report = json.loads(report_json)
    names = {r["check"] for r in report["records"]}
    assert passed and "intersection-expected" in names
    assert not any(n.startswith("clique") for n in names)
    print("stage selection ok")

    print("smoke test passed")


if __name__ == "__main__":
    main()
