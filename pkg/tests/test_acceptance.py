"""Acceptance criteria 1-8, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL ...`` line to the terminal.
Criteria 1-3 run the full convergence studies and take a few minutes.
"""
import numpy as np
import pytest

from nondivdg.analysis import (consistency_residual, errors_vs_exact, norm_h_theta, solve,
                               trace_inverse_constant)
from nondivdg.assembly import (PenaltyConfig, assemble_A, assemble_B_star, assemble_matrix,
                               assemble_system, calibrate_penalty, norm_weights, penalties,
                               stability_violations)
from nondivdg.coefficients import (CoefficientField, check_cordes, get_domain, get_problem,
                                   identity_coefficients, manufactured_rhs, sign_coefficients,
                                   sine_bump)
from nondivdg.experiments import RunConfig, domain_samples, run_experiment
from nondivdg.fe import DGSpace, boundary_face_quadrature
from nondivdg.mesh import element_areas, mesh_sequence
from nondivdg.analysis import eoc

from conftest import meshes, parabola, square_bubble
from test_tangential import FUNCTIONS, identity_errors

THRESHOLDS = {
    "exp1": {2: 0.80, 3: 1.70, 4: 2.50},
    "exp2": {2: 0.80, 3: 1.70, 4: 2.50},
    "exp3": {2: 0.85, 3: 1.70, 4: 2.50},
}
REFINEMENTS = 4


def report(request, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line)
    assert ok, line


def final_eocs(experiment, tmp_path):
    out = {}
    for p in (2, 3, 4):
        cfg = RunConfig(experiment=experiment, degree=p, refinements=REFINEMENTS,
                        output_dir=str(tmp_path / f"{experiment}_p{p}"))
        res = run_experiment(cfg, log=lambda *_: None)
        errs = res.table.errors()
        assert all(b < a for a, b in zip(errs[:-1], errs[1:])), "error not monotone"
        out[p] = res.table.rates()[-1]
    return out


def eoc_detail(rates, thresholds):
    return ", ".join(f"p={p} EOC {r:.3f} (>= {thresholds[p]})" for p, r in rates.items())


@pytest.mark.slow
def test_criterion_1_exp1_rates(request, tmp_path):
    rates = final_eocs("exp1", tmp_path)
    th = THRESHOLDS["exp1"]
    report(request, 1, all(rates[p] >= th[p] for p in th), eoc_detail(rates, th))


@pytest.mark.slow
def test_criterion_2_exp2_rates_and_cordes(request, tmp_path):
    domain, coeffs = get_problem("exp2")
    eps = check_cordes(coeffs, domain_samples(mesh_sequence(domain, 0.1, 1)[0])).epsilon
    rates = final_eocs("exp2", tmp_path)
    th = THRESHOLDS["exp2"]
    ok = all(rates[p] >= th[p] for p in th) and abs(eps - 0.6) <= 1e-12
    report(request, 2, ok, f"{eoc_detail(rates, th)}; eps = {eps:.15f}")


@pytest.mark.slow
def test_criterion_3_exp3_rates(request, tmp_path):
    rates = final_eocs("exp3", tmp_path)
    th = THRESHOLDS["exp3"]
    report(request, 3, all(rates[p] >= th[p] for p in th),
           "normalized " + eoc_detail(rates, th))


def test_criterion_4_consistency(request):
    w = sine_bump()
    on, off = [], []
    for m in meshes("disk", 0.5, 4):
        s = DGSpace(m, 2)
        on.append(abs(consistency_residual(s, w, mode="exact").residual))
        off.append(abs(consistency_residual(s, w, curvature_terms=False,
                                            mode="exact").residual))
    ratio = max(a / b for a, b in zip(on, off))
    decreasing = all(b < a for a, b in zip(on[:-1], on[1:]))
    report(request, 4, ratio <= 1e-3 and decreasing,
           f"max |Res(on)|/|Res(off)| = {ratio:.2e} (<= 1e-3); |Res(on)| "
           + " -> ".join(f"{x:.2e}" for x in on))


def test_criterion_5_stability_and_coercivity(request):
    thetas = (0.25, 0.5, 1.0)
    violations = 0
    coercive_bad = 0
    details = []
    for name in ("disk", "square"):
        ms = meshes(name)[:2]
        for p in (2, 3):
            cfg = calibrate_penalty(DGSpace(ms[0], p), PenaltyConfig())
            for level, m in enumerate(ms):
                s = DGSpace(m, p)
                pen = penalties(m, cfg)
                violations += stability_violations(s, cfg, thetas, kappa=2.0, n_vectors=100,
                                                   seed=level, pen=pen)
                coeffs = CoefficientField(2, sign_coefficients, lambda x: 0 * x[..., 0])
                eps = check_cordes(coeffs, domain_samples(m)).epsilon
                kappa = min(2.0, 0.5 * (1 + 1 / (1 - eps)))
                bound = 2 * kappa / (1 - kappa * (1 - eps))
                A = assemble_A(s, coeffs, cfg, pen)
                N = assemble_matrix(s, norm_weights(1.0, cfg.c_star), config=cfg, pen=pen)
                V = np.random.default_rng(100 + level).standard_normal((s.n_dofs, 100))
                a = np.einsum("ik,ik->k", V, A @ V)
                n = np.einsum("ik,ik->k", V, N @ V)
                coercive_bad += int(np.count_nonzero(n > bound * a))
            details.append(f"{name} p={p} c_stab={cfg.c_stab:g}")
    report(request, 5, violations == 0 and coercive_bad == 0,
           f"stability violations {violations}, coercivity violations {coercive_bad} "
           f"({'; '.join(details)})")


def test_criterion_6_tangential_identities(request):
    arc = get_domain("disk").portion(1)
    th = np.linspace(0, 2 * np.pi, 97)
    x = np.stack([np.cos(th), np.sin(th)], -1)
    chart = max(max(identity_errors(fn, x, arc.normal(x), arc)) for fn in FUNCTIONS)
    ms = meshes("disk", 0.5, 4)
    worst_rate = np.inf
    for fn in FUNCTIONS:
        errs = []
        for m in ms:
            q = boundary_face_quadrature(m, 6)
            errs.append(identity_errors(fn, q.points, q.edge_normal, arc))
        errs = np.array(errs)
        hs = np.array([m.h for m in ms])
        rates = np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])[:, None]
        worst_rate = min(worst_rate, rates.min())
    report(request, 6, chart <= 1e-10 and worst_rate >= 1.8,
           f"chart-point error {chart:.1e} (<= 1e-10); quadratic-geometry rate "
           f"{worst_rate:.2f} (>= 1.8)")


def test_criterion_7_oracles(request):
    fine = meshes("disk")[-1]
    rel = abs(norm_h_theta(DGSpace(fine, 2), parabola(), 1.0, order=6)
              - np.sqrt(12 * np.pi)) / np.sqrt(12 * np.pi)
    ms = mesh_sequence(get_domain("disk"), 0.5, 4)
    area_rate = min(eoc([(m.h, abs(element_areas(m).sum() - np.pi)) for m in ms]))
    growth = 0.0
    for p in (2, 3, 4):
        # from level 1 on the refinement is self-similar; see the decision log
        c = [trace_inverse_constant(DGSpace(m, p)) for m in meshes("disk", 0.5, 5)[1:]]
        growth = max(growth, max(b / a - 1 for a, b in zip(c[:-1], c[1:])))
    report(request, 7, rel <= 1e-5 and area_rate >= 2.8 and growth < 0.05,
           f"norm oracle rel err {rel:.1e} (<= 1e-5); area EOC {area_rate:.2f} (>= 2.8); "
           f"trace-inverse growth {100 * growth:.1f}% (< 5%)")


def test_criterion_8_polytopal_regression(request):
    diff = 0.0
    for p in (2, 3, 4):
        s = DGSpace(meshes("square")[0], p)
        on = assemble_B_star(s, PenaltyConfig(curvature_terms=True)).toarray()
        off = assemble_B_star(s, PenaltyConfig(curvature_terms=False)).toarray()
        diff = max(diff, np.abs(on - off).max())
    u = square_bubble()
    err = 0.0
    for A in (identity_coefficients, sign_coefficients):
        coeffs = CoefficientField(2, A, manufactured_rhs(A, u), exact_u=u)
        for m in meshes("square")[:2]:
            s = DGSpace(m, 4)
            uh = solve(assemble_system(s, coeffs))
            err = max(err, errors_vs_exact(s, uh, coeffs).err_h1norm)
    report(request, 8, diff <= 1e-12 and err <= 1e-8,
           f"on/off max entry difference {diff:.1e} (<= 1e-12); recovered bubble "
           f"||u - u_h||_h1 = {err:.1e} (<= 1e-8)")
