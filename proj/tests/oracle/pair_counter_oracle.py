"""Brute-force oracle for the pair counter, compared against `statesafe check` output."""

import json
import subprocess
import sys

LIMIT, Q, TOP = 10, 9, 12


def expected():
    found = set()
    for me in ("r1", "r2"):
        for n in range(TOP + 1):
            for m in range(TOP + 1):
                for n2 in range(TOP + 1):
                    for m2 in range(TOP + 1):
                        if n + m > LIMIT or n2 + m2 > LIMIT or n + m > Q:
                            continue
                        if max(n, n2) + max(m, m2) > LIMIT:
                            continue
                        if max(n + 1, n2) + max(m, m2) > LIMIT:
                            found.add(("incn", me, n, m, n2, m2))
                        if max(n, n2) + max(m + 1, m2) > LIMIT:
                            found.add(("incm", me, n, m, n2, m2))
    return found


def observed(tool):
    out = subprocess.run(
        [tool, "check", "pair_counter", "--stage", "concurrent", "--max-cex", "100000", "--format", "json"],
        capture_output=True, text=True, check=False)
    if out.returncode != 1:
        sys.exit(f"expected exit 1, got {out.returncode}: {out.stderr}")
    report = json.loads(out.stdout)
    stage = next(s for s in report["stages"] if s["stage"] == "ConcurrentSafety")
    got = set()
    for c in stage["counterexamples"]:
        w = {x["role"]: x["state"] for x in c["witnesses"]}
        got.add((c["operation"], c["me"], w["sigma"]["n"], w["sigma"]["m"], w["sigma'"]["n"], w["sigma'"]["m"]))
    return got, stage["violation_counts"]


def main():
    exp = expected()
    got, counts = observed(sys.argv[1])
    if got != exp:
        sys.exit(f"mismatch: {len(exp - got)} missing, {len(got - exp)} extra")
    for op in ("incn", "incm"):
        n = sum(1 for e in exp if e[0] == op)
        if counts.get(f"op.preserves_pre_merge[{op}]") != n:
            sys.exit(f"count mismatch for {op}: {counts}")
    print(f"ok: {len(exp)} violations agree")


if __name__ == "__main__":
    main()
