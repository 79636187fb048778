"""Acceptance criteria 1-10.

Each test prints one ``PASS``/``FAIL`` line (also when run as a script:
``python tests/test_acceptance.py``) and asserts the same condition at the
stated tolerance and runtime budget.
"""

import sys
import time

import numpy as np

from acx import io
from acx.core import c2_distance, levi_min_on_tangent
from acx.disc import (DeformationTensor, PolarGrid, RiemannHilbertData, cauchy_green,
                      coeffs_to_real, dbar_residual, linearized_rh_operator, reflect, seam_report,
                      solve_j_disc)
from acx.fields import BoxDomain, PolynomialScalar, random_structure, standard_structure
from acx.kobayashi import MetricQuery, blowup_rate_fit, hopf_margin, kr_bracket, kr_upper
from acx.lift import LiftedStructure, lift_grid, lifted_residual_on_grid, project_to_surface, total_reality_test
from acx.poly import Poly
from acx.scaling import (DilationSpec, dilate_structure, polydisc_samples, scaling_sequence)

_LINES = []


def verdict(n, ok, detail, capsys=None):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    _LINES.append(line)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def _var(dim, i):
    return Poly.var(dim, i)


def test_criterion_01_lift_validity(capsys):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    xs, ps = lift_grid(4, 5)
    worst = 0.0
    for _ in range(20):
        J = random_structure(2, 0.1, rng)
        worst = max(worst, lifted_residual_on_grid(LiftedStructure(J), xs, ps))
    dt = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and dt < 10,
            f"max |J~^2 + I| = {worst:.2e} (<= 1e-9) over 20 structures, runtime {dt:.1f}s (< 10s)", capsys)


def test_criterion_02_cauchy_green(capsys):
    grid = PolarGrid(64, 128)
    t0 = time.perf_counter()
    worst = 0.0
    for g in (lambda z: np.ones_like(z), lambda z: z, np.conj, lambda z: np.exp(z.real)):
        worst = max(worst, dbar_residual(cauchy_green(g, grid=grid), g))
    T1 = cauchy_green(lambda z: np.ones_like(z), grid=grid)
    conj_err = float(np.max(np.abs(T1(grid.points)[..., 0] - np.conj(grid.points))))
    dt = time.perf_counter() - t0
    verdict(2, worst <= 1e-4 and conj_err <= 1e-4 and dt < 5,
            f"dbar residual {worst:.2e}, |T(1) - conj(tau)| {conj_err:.2e} (<= 1e-4), runtime {dt:.2f}s (< 5s)",
            capsys)


def test_criterion_03_disc_solver(capsys):
    h = [[0, 0.5, 0.1j], [0.2, 0.3]]
    t0 = time.perf_counter()
    f0 = solve_j_disc(DeformationTensor.zero(2), 1.0, h)
    exact = bool(np.array_equal(f0.coeffs[:, :3, 0], np.array([[0, 0.5, 0.1j], [0.2, 0.3, 0]])))
    exact = exact and not np.any(f0.coeffs[:, :, 1:]) and not np.any(f0.coeffs[:, 3:, 0])
    dt0 = time.perf_counter() - t0
    J = io.load("diagonal")[0]
    q = DeformationTensor.from_structure(J)
    v1 = 0.4 + 0.1j
    t0 = time.perf_counter()
    f = solve_j_disc(q, 1.0, [[0, v1], [0, 0, 0.3]], pin=([0, 0], [v1, 0]))
    dt = time.perf_counter() - t0
    # (f^2)_{zeta zetabar}(0) is the coefficient of zeta zetabar in the second component
    f2 = abs(f.coeffs[1, 1, 1])
    verdict(3, exact and f2 < 1e-6 and max(dt0, dt) < 5,
            f"q=0 coefficient-exact: {exact}; (f^2)_zz(0) = {f2:.1e} (< 1e-6), "
            f"runtime {max(dt0, dt):.2f}s per disc (< 5s)", capsys)


def test_criterion_04_bishop_kernel(capsys):
    defects = {}
    for n in (1, 2):
        for N in (8, 16):
            defects[(n, N)] = linearized_rh_operator(RiemannHilbertData.torus(n, N), N).rank_deficiency()
    ranks_ok = all(d == 3 * n for (n, _), d in defects.items())
    N = 8
    K = linearized_rh_operator(RiemannHilbertData.torus(1, N), N).kernel()
    pad = lambda c: np.array([c + [0] * (N + 1 - len(c))])
    ref = np.stack([coeffs_to_real(pad([0, 1j])), coeffs_to_real(pad([-1, 0, 1])),
                    coeffs_to_real(pad([1j, 0, 1j]))], axis=1)
    Q, _ = np.linalg.qr(ref)
    err = float(np.max(np.abs(K @ K.T - Q @ Q.T)))
    verdict(4, ranks_ok and err <= 1e-8,
            f"rank deficiency {[defects[k] for k in sorted(defects)]} for (n,N) in "
            f"{sorted(defects)} (expect 3n); kernel projector error {err:.1e} (<= 1e-8)", capsys)


def _disc(d, cx=0.0):
    y = [_var(2, 0), _var(2, 1)]
    pad = 1.1 * d
    return BoxDomain(2, [cx - pad, -pad], [cx + pad, pad], PolynomialScalar((y[0] - cx) ** 2 + y[1] ** 2 - d * d))


def test_criterion_05_metric_anchors(capsys):
    J1, J2 = standard_structure(1), standard_structure(2)
    br = kr_bracket(MetricQuery(io.load("disc")[0], J1, [0, 0], [1, 0]))
    width = br.upper - br.lower
    tau = np.array([0.3, 0.4])
    rel = []
    for d in (0.5, 0.25):
        up, _ = kr_upper(MetricQuery(_disc(d, 0.2), J1, [0.2, 0], tau), 1e-4)
        rel.append(abs(up * d / np.linalg.norm(tau) - 1))
    pairs = [("disc_half", "disc", J1, [([0, 0], [1, 0]), ([0.1, 0.2], [0.3, -0.4])]),
             ("ball_half", "ball", J2, [([0, 0, 0, 0], [1, 0, 0, 0]), ([0.1, 0, 0.2, 0], [0, 0, 0.6, 0.8])])]
    mono = []
    for small, big, J, queries in pairs:
        Ds, Db = io.load(small)[0], io.load(big)[0]
        for q, v in queries:
            ks, _ = kr_upper(MetricQuery(Ds, J, q, v), 1e-4)
            kb, _ = kr_upper(MetricQuery(Db, J, q, v), 1e-4)
            mono.append(ks >= kb)
    ok = br.contains(1.0) and width <= 0.2 and max(rel) <= 0.02 and all(mono)
    verdict(5, ok,
            f"bracket [{br.lower:.3f}, {br.upper:.4f}] contains 1: {br.contains(1.0)}, "
            f"width {width:.3f} (<= 0.2); |tau|/d rel. errors {max(rel):.1e} (<= 2%); "
            f"monotonicity {sum(mono)}/{len(mono)} queries on 2 nested fixture pairs", capsys)


def test_criterion_06_blowup_rates(capsys):
    ball = io.load("ball")[0]
    J = standard_structure(2)
    t0 = time.perf_counter()
    normal = blowup_rate_fit(ball, J, [0, 0, 0, -1.0], "normal").slope
    tangential = blowup_rate_fit(ball, J, [0, 0, 0, -1.0], "tangential").slope
    dt = time.perf_counter() - t0
    verdict(6, abs(normal + 1) <= 0.1 and abs(tangential + 0.5) <= 0.1 and dt < 60,
            f"normal slope {normal:.3f} (-1 +- 0.1), tangential slope {tangential:.3f} (-0.5 +- 0.1), "
            f"runtime {dt:.1f}s (< 60s)", capsys)


def test_criterion_07_total_reality(capsys):
    rng = np.random.default_rng(11)
    x = [_var(4, i) for i in range(4)]
    Jst = standard_structure(2)
    sphere = PolynomialScalar(sum(v * v for v in x) - 1)
    s_pts = rng.normal(size=(6, 4))
    s_pts /= np.linalg.norm(s_pts, axis=1)[:, None]
    model = PolynomialScalar(2 * x[2] + x[0] ** 2 + x[1] ** 2)
    m_pts = project_to_surface(model, rng.uniform(-0.5, 0.5, (6, 4)))
    Jdil = dilate_structure(io.load("diagonal")[0], DilationSpec("nonisotropic", 1e-2))
    flat = io.load("levi_flat")[0]
    f_pts = rng.uniform(-0.5, 0.5, (6, 4))
    f_pts[:, 2] = 0
    cases = [("S^3", sphere, Jst, s_pts, True), ("model, dilated J", model, Jdil, m_pts, True),
             ("Re z2 = 0", flat, Jst, f_pts, False)]
    parts, ok = [], True
    for name, rho, J, pts, expect in cases:
        rep = total_reality_test(rho, J, pts)
        real = rep.angles > rep.threshold
        nondeg = np.array([abs(levi_min_on_tangent(J, rho, z)) > 1e-6 for z in pts])
        agree = bool(np.all(real == nondeg))
        ok = ok and agree and (bool(np.all(real)) if expect else not np.any(real))
        parts.append(f"{name}: {'passes' if rep.passed else 'fails'} (min angle {rep.min_angle:.2e}), "
                     f"Levi agreement {agree}")
    verdict(7, ok, "; ".join(parts), capsys)


def test_criterion_08_scaling(capsys):
    t0 = time.perf_counter()
    J = io.load("diagonal")[0]
    pts = polydisc_samples()
    ds = 2.0 ** -np.arange(1, 9)
    dist = [c2_distance(dilate_structure(J, DilationSpec("nonisotropic", d)), pts) for d in ds]
    slope = float(np.polyfit(np.log(ds), np.log(dist), 1)[0])
    rho = PolynomialScalar(2 * _var(4, 2) + sum(_var(4, i) ** 2 for i in range(4))
                           + 0.3 * _var(4, 0) ** 3 + 0.2 * _var(4, 0) * _var(4, 3))
    P = np.array([[0, 0, -2.0 ** -k, 0] for k in range(1, 8)])
    R = scaling_sequence(rho, J, P)
    rho_decay = bool(np.all(np.diff(R.rho_c2) < 0)) and R.rate() > 0.4
    M = scaling_sequence(io.load("model")[0].defining_function, None, P)
    stationary = float(max(M.rho_c2.max(), M.j_sup.max(), M.point_error.max()))
    dt = time.perf_counter() - t0
    verdict(8, slope >= 0.4 and rho_decay and stationary < 1e-12 and dt < 30,
            f"C2 slope {slope:.3f} (>= 0.4); rho_delta C2 error {R.rho_c2[0]:.2e} -> {R.rho_c2[-1]:.2e} "
            f"(rate {R.rate():.2f}); model drift {stationary:.1e}; runtime {dt:.1f}s (< 30s)", capsys)


def test_criterion_09_reflection(capsys):
    q = io.load("reflection_q")[0]
    g = solve_j_disc(q, 0.1, [[0, 0.8, 0.1]], tol=1e-12)
    rep = seam_report(reflect(g, q, 0.1))
    res = max(rep["residual_upper"], rep["residual_lower"])
    verdict(9, res <= 1e-6 and rep["derivative_jump"] <= 1e-4,
            f"equation residual {rep['residual_upper']:.1e} / {rep['residual_lower']:.1e} (<= 1e-6), "
            f"seam derivative jump {rep['derivative_jump']:.1e} (<= 1e-4)", capsys)


def test_criterion_10_hopf(capsys):
    ball = io.load("ball")[0]
    rb = hopf_margin(ball, ball.defining_function, [[0, 0, 0, 0]])
    disc = io.load("disc")[0]
    rd = hopf_margin(disc, disc.defining_function, [[0, 0]])
    dyadic = bool(np.allclose(rb.deltas[1:] / rb.deltas[:-1], 0.5)) and len(rb.deltas) == 4
    verdict(10, rb.passed and rb.margin > 0 and dyadic and rd.margin >= 1,
            f"ball ratios {np.round(rb.ratios, 4).tolist()} over 4 dyadic scales; "
            f"disc exact-bound ratio {rd.margin:.4f} (>= 1)", capsys)


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(None)
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
