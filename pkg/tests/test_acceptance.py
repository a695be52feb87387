"""Acceptance criteria C1-C13, one PASS/FAIL line each.

Tolerances are pinned below.  Criteria that cannot be met as stated are
run in full, print FAIL and are marked strict xfail, so an unexpected pass
breaks the suite.  Run directly (``python3 tests/test_acceptance.py``) to
print the lines without pytest.
"""

import functools
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

from nonisopot.experiments import BATTERIES

FUBINI_TOL = 1e-12
WOLFF_C, WOLFF_CHANGE = 100.0, 0.20
SLOPE_EXPECTED, SLOPE_TOL = 0.5, 0.15
COMPARISON_C = 50.0
AP_GROWTH = 10.0
TAU_TOL = 0.2
ORACLE_REL, ORACLE_GAP = 1e-4, 1e-6
EXTREMAL_REL, EXTREMAL_RATIO, EXTREMAL_CHANGE = 1e-4, 10.0, 0.30
HOLO_CHANGE = 0.30
TRACE_MAX, TRACE_CHANGE = 10.0, 0.20
FINITE_DEV, DIVERGENT_GROWTH = 0.05, 2.0
NORM_C, NORM_CHANGE, INTERP_C = 50.0, 0.30, 2.0
# families whose max ratio is compared across alpha and k; alpha_robust is itself an alpha ratio
STABILITY_FAMILIES = ("area/radial", "radial/hs", "maximal/hardy", "area0/hardy")


@functools.lru_cache(maxsize=None)
def battery(name):
    return BATTERIES[name]()


def line(key, ok, detail):
    return f"{key} {'PASS' if ok else 'FAIL'}  {detail}"


def c1():
    _, s = battery("fubini")
    ok = s["max_rel_error"] <= FUBINI_TOL and s["cases"] == 50
    return ok, f"max rel error {s['max_rel_error']:.2e} over {s['cases']} cases (tol {FUBINI_TOL:g})"


def _groups(rows, key):
    out = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in key), []).append(r)
    return out


def c2():
    rows, s = battery("wolff")
    bad = []
    for (n, w, p), sub in _groups(rows, ("n", "weight", "p")).items():
        ratios = [r["ratio"] for r in sub]
        C = max(max(ratios), 1 / min(ratios))
        changes = []
        for g in _groups(sub, ("measure_id",)).values():
            g = sorted(g, key=lambda r: r["resolution"])
            changes.append(abs(g[-1]["ratio"] / g[0]["ratio"] - 1))
        if C > WOLFF_C or max(changes) >= WOLFF_CHANGE:
            bad.append(f"n={n} {w} p={p:g}: C={C:.3g}, change={max(changes):.1%}")
    ok = s["C"] <= WOLFF_C and s["max_change"] < WOLFF_CHANGE
    detail = f"C={s['C']:.3g} (<= {WOLFF_C:g}), max change {s['max_change']:.1%} (< {WOLFF_CHANGE:.0%})"
    if bad:
        detail += "; failing: " + "; ".join(bad)
    return ok, detail


def c3():
    _, s = battery("ball-exponent")
    ok = abs(s["slope"] - SLOPE_EXPECTED) <= SLOPE_TOL
    return ok, f"slope {s['slope']:.4f} vs {SLOPE_EXPECTED} +- {SLOPE_TOL}"


def c4():
    _, s = battery("ball-comparison")
    return s["C"] <= COMPARISON_C, f"ratios in [{s['min']:.3g}, {s['max']:.3g}], C={s['C']:.3g} (<= {COMPARISON_C:g})"


def c5():
    _, s = battery("ap")
    ok = s["unit"] == 1.0 and s["growth"] >= AP_GROWTH
    return ok, f"A_2(1) = {s['unit']!r}, power(1.5) growth {s['growth']:.2f}x (>= {AP_GROWTH:g}x)"


def c6():
    rows, s = battery("doubling")
    detail = ", ".join(f"eps={r['eps']:g}: tau={r['tau']:.3f} (want {r['expected']:g})" for r in rows)
    return s["max_abs_error"] <= TAU_TOL, detail + f"; tol {TAU_TOL}"


def c7():
    rows, s = battery("solver")
    ok = s["max_rel_diff"] <= ORACLE_REL and s["max_gap"] < ORACLE_GAP
    return ok, (f"{len(rows)} instances, max rel diff {s['max_rel_diff']:.2e} (<= {ORACLE_REL:g}), "
                f"max gap {s['max_gap']:.2e} (< {ORACLE_GAP:g})")


def c8():
    _, s = battery("extremal")
    ok = (s["max_mass_error"] <= EXTREMAL_REL and s["max_energy_error"] <= EXTREMAL_REL
          and s["max"] <= EXTREMAL_RATIO and s["max_change"] <= EXTREMAL_CHANGE)
    return ok, (f"mass err {s['max_mass_error']:.1e}, energy err {s['max_energy_error']:.1e}, "
                f"Wolff max/min up to {s['max']:.3g} (<= {EXTREMAL_RATIO:g}), change {s['max_change']:.1%}")


def c9():
    _, s = battery("holo")
    ok = True
    parts = []
    for name, v in s.items():
        Cs = list(v["C_by_resolution"].values())
        change = abs(Cs[-1] / Cs[0] - 1)
        ok &= v["c"] > 0 and change <= HOLO_CHANGE
        parts.append(f"{name}: c={v['c']:.3g}, C={Cs[0]:.3g}->{Cs[-1]:.3g} ({change:.1%})")
    return ok, "; ".join(parts)


def c10():
    _, s = battery("trace")
    ok = (s["min_ratio"] >= 1 and s["max_ratio"] <= TRACE_MAX and s["max_change"] <= TRACE_CHANGE
          and s["domination_holds"])
    return ok, (f"K/C in [{s['min_ratio']:.4g}, {s['max_ratio']:.4g}], change {s['max_change']:.2%}, "
                f"C <= K in every run: {s['domination_holds']}")


def c11():
    _, s = battery("continuity")
    ok = s["finite_max_deviation"] <= FINITE_DEV and s["divergent_min_growth"] >= DIVERGENT_GROWTH
    return ok, (f"finite cases within {s['finite_max_deviation']:.1%} of 1, divergent growth >= "
                f"{s['divergent_min_growth']:.3g}x; report only: n-sp=0.4 case grows {s['weak_growth']:.3g}x")


def _max_ratio_changes(rows):
    """Largest relative change of each family's max ratio across (alpha, k) configurations."""
    out = {}
    for fam in STABILITY_FAMILIES:
        maxes = {}
        for r in rows:
            if r["family"] == fam:
                key = (r["alpha"], r["k"])
                maxes[key] = max(maxes.get(key, 0.0), r["ratio"])
        ref = maxes[min(maxes)]
        out[fam] = max(abs(v / ref - 1) for v in maxes.values())
    return out


def c12_parts():
    rows, s = battery("norms")
    _, h = battery("hardy-area")
    C = max(s["C"], h["C"])
    changes = _max_ratio_changes(rows)
    bounded = C <= NORM_C and s["interpolation_max"] <= INTERP_C
    stable = all(v <= NORM_CHANGE for v in changes.values())
    spread = max(v["spread_change"] for v in s["stability"].values())
    detail = (f"C={C:.3g} (<= {NORM_C:g}), interpolation max {s['interpolation_max']:.3f} (<= {INTERP_C:g}), "
              "max-ratio change across alpha,k: " + ", ".join(f"{k} {v:.0%}" for k, v in changes.items())
              + f" (<= {NORM_CHANGE:.0%}); geometric-mean-normalised spread change {spread:.1%}")
    return bounded, stable, detail


def c12():
    bounded, stable, detail = c12_parts()
    return bounded and stable, detail


def c13():
    args = ["wolff-ratio", "--n", "1", "--resolution", "256", "--measures", "5", "--seed", "11"]
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for name in ("a.csv", "b.csv"):
            path = Path(tmp) / name
            proc = subprocess.run([sys.executable, "-m", "nonisopot", *args, "--out", str(path)],
                                  capture_output=True, text=True)
            if proc.returncode:
                return False, f"run failed: {proc.stderr.strip()}"
            outs.append(path.read_bytes())
    same = outs[0] == outs[1]
    return same, f"two processes, {len(outs[0])} bytes each, identical: {same}"


CRITERIA = {f"C{i}": fn for i, fn in enumerate((c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13), 1)}


def check(key, record):
    ok, detail = CRITERIA[key]()
    record(key, line(key, ok, detail))
    assert ok, detail


@pytest.mark.parametrize("key", [k for k in CRITERIA if k not in ("C2", "C6", "C12")])
def test_criterion(key, record_criterion):
    check(key, record_criterion)


@pytest.mark.xfail(strict=True, reason="n=2, power(0.3), p=1.5: ratio exceeds 100 and is unresolved at 16/32")
def test_c2_wolff_equivalence(record_criterion):
    check("C2", record_criterion)


@pytest.mark.xfail(strict=True, reason="for eps < 0 the doubling order is n, not n + eps")
def test_c6_doubling_order(record_criterion):
    check("C6", record_criterion)


def test_c12_bounds_and_interpolation():
    bounded, _, detail = c12_parts()
    assert bounded, detail


@pytest.mark.xfail(strict=True, reason="unnormalised area functions scale with the cone aperture")
def test_c12_alpha_stability(record_criterion):
    check("C12", record_criterion)


if __name__ == "__main__":
    failed = 0
    for key, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(line(key, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
