"""Acceptance criteria 1-13, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed as they are
produced and again in a summary section at the end of the pytest run.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from refgames.cli import main
from refgames.geometry import extract_pareto_boundary, affine_point
from refgames.measure import (
    GOLDEN_B,
    AlternatingPair,
    CdfGrid,
    GridMeasure,
    Phi,
    RawPair,
    b_eps,
    bisect,
    hybrid_schedule,
    iterate_cdf,
    iterate_cdf_until,
    pareto_band_mass,
    phi,
    phi_eps,
)
from refgames.solution import (
    PROBE_SCALE,
    PROBE_SHIFT,
    ternary_alternating_fixed_point,
    ternary_random_limit,
    track_quantiles,
)
from refgames.streams import CounterStream
from refgames.tree import (
    AssignmentModel,
    GameSpec,
    empirical_box_mass,
    exact_spe_value,
    ks_statistic,
    record_stream,
    sample_spe_value,
)

RES = 512
CELL = 1.0 / RES


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_golden_ratio_concentration(tmp_path):
    t0 = time.perf_counter()
    code = main(["iterate-cdf", "--map", "phi", "--steps", "30", "--output", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    grid = CdfGrid.from_csv((tmp_path / "cdf.csv").read_text())
    lo, hi = float(grid(GOLDEN_B - 0.05)), float(grid(GOLDEN_B + 0.05))
    ok = code == 0 and lo < 1e-3 and hi > 1 - 1e-3 and elapsed < 1.0
    record(1, "golden-ratio concentration", ok, f"F(b-0.05)={lo:.3g}, F(b+0.05)={hi:.12g}, {elapsed:.2f} s")


def test_criterion_02_monte_carlo_agreement(alternating_d20):
    samples, elapsed = alternating_d20
    n = len(samples)
    grid = iterate_cdf(CdfGrid.uniform(4096), 10, Phi())  # F_20: ten two-level steps
    p = float(grid(GOLDEN_B + 0.05) - grid(GOLDEN_B - 0.05))
    emp = empirical_box_mass(samples.payoff1, GOLDEN_B, 0.05)
    sd = math.sqrt(p * (1 - p) / n)
    ok = abs(emp - p) <= 3 * sd and elapsed < 120
    record(2, "Monte Carlo vs analytic F_20 band mass", ok,
           f"empirical={emp:.6f}, analytic={p:.12f}, 3sd={3 * sd:.2g}, {elapsed:.1f} s for {n} replicates")


def test_criterion_03_uniform_invariance(random_d15):
    n = len(random_d15)
    ks = ks_statistic(random_d15.payoff1, lambda x: np.clip(x, 0.0, 1.0))
    crit = 1.36 / math.sqrt(n)
    rng = np.random.default_rng(0)
    grids = [CdfGrid.uniform(4096), CdfGrid(np.linspace(0, 1, 1001), np.linspace(0, 1, 1001) ** 3)]
    F = np.concatenate(([0.0], np.sort(rng.random(998)), [1.0]))
    grids.append(CdfGrid(np.linspace(0, 1, 1000), F))
    drift = max(np.max(np.abs(iterate_cdf(g, 1, RawPair(0.5)).F - g.F)) for g in grids)
    ok = ks < crit and drift <= 1e-15
    record(3, "uniform invariance of the random-controller value", ok,
           f"KS={ks:.5f} < {crit:.5f}, RAW_PAIR(1/2) drift={drift:.2g}")


def test_criterion_04_hybrid_identity():
    xs = np.linspace(0, 1, 1001)
    diff = float(np.max(np.abs(phi_eps(xs, 0.5) - phi(xs))))
    err = abs(b_eps(0.5).value - (math.sqrt(5) - 1) / 2)
    ok = diff <= 1e-12 and err <= 1e-12
    record(4, "hybrid identity at eps=1/2", ok, f"max|phi_eps-phi|={diff:.2g}, |b_eps(1/2)-b|={err:.2g}")


def test_criterion_05_hybrid_fixed_point():
    b = b_eps(0.25).value
    closed = (math.sqrt(17) - 3) / 2
    root = bisect(lambda x: phi_eps(x, 0.25) - x, 0.05, 0.95, tol=1e-14)
    vals = [b_eps(e).value for e in (0.1, 0.01, 0.001)]
    decreasing = vals[0] > vals[1] > vals[2] > 0.5
    ok = abs(b - closed) <= 1e-12 and abs(b - root) <= 1e-10 and decreasing
    record(5, "hybrid fixed point b^eps", ok,
           f"b_eps(1/4)={b:.12f}, |b-closed|={abs(b - closed):.2g}, |b-bisect|={abs(b - root):.2g}, "
           f"b_eps(0.1, 0.01, 0.001)={', '.join(f'{v:.6f}' for v in vals)}")


def test_criterion_06_mass_conservation(triangle):
    m = hybrid_schedule(GridMeasure.from_domain(triangle, RES), 0.1, 100)
    err = abs(m.total - 1.0)
    record(6, "mass conservation over 100 hybrid levels at 512x512", err <= 1e-9, f"|total-1|={err:.2g}")


def test_criterion_07_monotone_tracks(triangle, random_triangle_run):
    alt = track_quantiles(triangle, "alternating", 100, resolution=RES)
    rnd, _ = random_triangle_run
    keep = rnd.steps <= 100
    rx, ry = rnd.xs[keep], rnd.ys[keep]
    alt_drop = alt.max_decrease()[0]
    rnd_drop = max(0.0, float(-np.diff(rx).min()), float(-np.diff(ry).min()))
    ok = alt_drop <= CELL and rnd_drop <= CELL
    record(7, "monotone quantile tracks on the triangle", ok,
           f"alternating x-track max drop={alt_drop:.2g}, random medians max drop={rnd_drop:.2g}, slack={CELL:.2g}")


def test_criterion_08_pareto_band(triangle, random_triangle_run):
    _, measure = random_triangle_run
    mass = pareto_band_mass(measure, extract_pareto_boundary(triangle), 0.05)
    record(8, "Pareto-band concentration, random schedule", mass >= 0.95, f"band mass(0.05) after 200 levels={mass:.6f}")


def test_criterion_09_hybrid_concentration_and_symmetry(ref_triangle):
    d = ref_triangle.diagnostics
    box = d["box_mass_0_05"][d["eps_schedule"].index(0.1)]
    gaps = [abs(v) for v in d["x_minus_y"]]
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    dist = math.dist(ref_triangle.point, (0.5, 0.5))
    ok = box >= 0.9 and decreasing and gaps[-1] <= 0.02 and dist <= 0.02
    record(9, "hybrid concentration and symmetry limit", ok,
           f"box mass at eps=0.1={box:.6f}, |x-y|={', '.join(f'{g:.4f}' for g in gaps)}, "
           f"REF={tuple(round(v, 5) for v in ref_triangle.point)}, distance to (1/2,1/2)={dist:.4f}")


def test_criterion_10_affine_invariance(ref_triangle, ref_triangle_image):
    mapped = affine_point(ref_triangle.point, PROBE_SCALE, PROBE_SHIFT)
    gap = math.dist(mapped, ref_triangle_image.point)
    record(10, "affine invariance of REF", gap <= 0.03,
           f"REF(image)={tuple(round(v, 5) for v in ref_triangle_image.point)}, "
           f"mapped REF={tuple(round(v, 5) for v in mapped)}, gap={gap:.2g}")


def test_criterion_11_oracle_equivalence(triangle, segment):
    models = [AssignmentModel.alternating(), AssignmentModel.random(), AssignmentModel.hybrid(0.2)]
    mismatches = 0
    trials = 0
    for depth in range(1, 11):
        for trial in range(1000):
            domain = triangle if trial % 2 == 0 else segment
            spec = GameSpec(domain, models[trial % 3], depth)
            seed = 1_000_003 * depth + trial
            leaves, controllers = record_stream(spec, seed, 0)
            streamed = sample_spe_value(spec, CounterStream(seed, 0))
            mismatches += not np.array_equal(streamed, exact_spe_value(leaves, controllers))
            trials += 1
    record(11, "streaming sampler vs explicit backward induction", mismatches == 0,
           f"{mismatches} mismatches in {trials} trials (depths 1-10)")


def test_criterion_12_ternary(triangle):
    root = ternary_alternating_fixed_point()
    residual = abs(1 - (1 - root.value**3) ** 3 - root.value)
    grid, steps, converged = iterate_cdf_until(CdfGrid.uniform(4096), AlternatingPair(3))
    h = grid.cell
    lo, hi = float(grid(root.value - h)), float(grid(root.value + h))
    cdf_ok = converged and lo < 1e-3 and hi > 1 - 1e-3
    m = GridMeasure.from_domain(triangle, RES)
    cells = dict(ternary_random_limit(measure=m, steps=200, count=2))
    corner1 = next((mass for p, mass in cells.items() if math.dist(p, (1, 0)) <= m.cell_diagonal), 0.0)
    corner2 = next((mass for p, mass in cells.items() if math.dist(p, (0, 1)) <= m.cell_diagonal), 0.0)
    ok = (abs(root.value - 0.68) <= 0.01 and residual <= 1e-12 and cdf_ok
          and abs(corner1 - 0.5) <= 0.1 and abs(corner2 - 0.5) <= 0.1)
    record(12, "ternary trees", ok,
           f"root={root.value:.10f}, residual={residual:.2g}, F(root-cell)={lo:.2g}, F(root+cell)={hi:.10f} "
           f"after {steps} steps, corner masses={corner1:.6f}, {corner2:.6f}")


def test_criterion_13_cross_route_consistency(ref_triangle):
    d = ref_triangle.diagnostics
    gap = d["cross_route_discrepancy"]
    record(13, "REF extrapolation vs random-schedule median limit", gap <= 0.03,
           f"REF={tuple(round(v, 5) for v in ref_triangle.point)}, "
           f"medians={tuple(round(v, 5) for v in d['random_median_limit'])}, discrepancy={gap:.4f}")
