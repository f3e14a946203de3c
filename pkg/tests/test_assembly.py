from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nondivdg.analysis import interpolate
from nondivdg.assembly import (PenaltyConfig, assemble_A, assemble_B_star, assemble_B_theta,
                               assemble_J, assemble_matrix, assemble_rhs, auto_c_H,
                               b_theta_weights, calibrate_penalty, norm_weights, penalties,
                               stability_eigenvalue, stability_rhs_weights,
                               stability_violations)
from nondivdg.coefficients import (BoundaryData, CircularArc, CoefficientField, DomainSpec,
                                   check_cordes, get_problem,
                                   identity_coefficients, laplace_problem)
from nondivdg.errors import ConfigurationError, GeometryError
from nondivdg.experiments import domain_samples
from nondivdg.fe import DGSpace, boundary_face_quadrature, interior_face_quadrature
from nondivdg.mesh import generate_affine_mesh, snap_boundary

from conftest import meshes
from reference_assembly import polytopal_B_half


def dense(M):
    return M.toarray()


# ---------------------------------------------------------------------------
# penalties
# ---------------------------------------------------------------------------

def test_penalty_substitution():
    fake = SimpleNamespace(h_interior=np.array([0.1]), h_boundary=np.array([0.1]))
    pen = penalties(fake, PenaltyConfig(sigma=1, c_stab=10, c_H=1))
    assert pen.mu_interior[0] == pytest.approx(101.0, rel=1e-14)
    assert pen.eta_interior[0] == pytest.approx(1000.0, rel=1e-12)
    assert pen.mu_boundary[0] == pytest.approx(101.0, rel=1e-14)


def test_penalty_sigma_scales():
    m = meshes("disk")[0]
    a = penalties(m, PenaltyConfig(c_H=0.5))
    b = penalties(m, PenaltyConfig(sigma=3, c_H=0.5))
    np.testing.assert_allclose(b.mu_interior, 3 * a.mu_interior)
    np.testing.assert_allclose(b.eta_boundary, 3 * a.eta_boundary)


def test_c_H_square_is_zero():
    assert auto_c_H(meshes("square")[0]) == 0.0


def test_c_H_disk():
    assert auto_c_H(meshes("disk")[0]) == pytest.approx(1.5, rel=1e-12)


class InwardArc(CircularArc):
    def curvature(self, x):
        H, G = super().curvature(x)
        return -H, -G


def test_negative_mean_curvature_rejected():
    d = DomainSpec("disk", (InwardArc(1),))
    m = snap_boundary(generate_affine_mesh(d, 0.5))
    with pytest.raises(GeometryError):
        auto_c_H(m)


@pytest.mark.parametrize("kw", [dict(sigma=0.5), dict(c_stab=0), dict(c_H=-1),
                                dict(c_star=0), dict(theta=0), dict(theta=1.5)])
def test_penalty_config_validation(kw):
    with pytest.raises(ConfigurationError):
        PenaltyConfig(**kw)


# ---------------------------------------------------------------------------
# bilinear forms
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 4])
def test_square_curvature_terms_vanish(p):
    s = DGSpace(meshes("square")[0], p)
    on = dense(assemble_B_star(s, PenaltyConfig(curvature_terms=True)))
    off = dense(assemble_B_star(s, PenaltyConfig(curvature_terms=False)))
    assert np.abs(on - off).max() <= 1e-12 * np.abs(on).max()


@pytest.mark.parametrize("p", [2, 3])
def test_disk_B_star_symmetric(p):
    B = dense(assemble_B_star(DGSpace(meshes("disk")[0], p)))
    assert np.abs(B - B.T).max() <= 1e-10 * np.abs(B).max()


def test_hessian_term_of_quadratic():
    # |x^2 + y^2|_{H^2}^2 = 8 |Omega| on the unit square
    s = DGSpace(meshes("square")[0], 2)
    c = interpolate(s, lambda x: x[..., 0] ** 2 + x[..., 1] ** 2)
    H = dense(assemble_matrix(s, {"hess": 1.0}))
    assert c @ H @ c == pytest.approx(8.0, rel=1e-10)


@pytest.mark.parametrize("name", ["disk", "square"])
def test_J_psd(name, rng):
    s = DGSpace(meshes(name)[0], 3)
    J = dense(assemble_J(s))
    assert np.abs(J - J.T).max() <= 1e-12 * np.abs(J).max()
    assert np.linalg.eigvalsh(0.5 * (J + J.T)).min() >= -1e-9 * np.abs(J).max()
    V = rng.normal(size=(s.n_dofs, 20))
    assert np.all(np.einsum("ik,ik->k", V, J @ V) >= 0)


@pytest.mark.parametrize("name", ["disk", "square"])
def test_J_indicator(name):
    m = meshes(name)[0]
    s = DGSpace(m, 2)
    pen = penalties(m, PenaltyConfig())
    k = 3
    c = np.zeros(s.n_dofs)
    c[s.dofs(k)[0]] = 1 / np.sqrt(2)       # constant 1 on element k
    J = assemble_J(s, pen=pen)
    expect = 0.0
    fi = interior_face_quadrature(m, 6)
    fb = boundary_face_quadrature(m, 6)
    for i in np.flatnonzero((m.interior_faces[:, 0] == k) | (m.interior_faces[:, 1] == k)):
        expect += pen.eta_interior[i] * fi.weights[i].sum()
    for i in np.flatnonzero(m.boundary_faces[:, 0] == k):
        expect += pen.eta_boundary[i] * fb.weights[i].sum()
    assert c @ (J @ c) == pytest.approx(expect, rel=1e-11)


def test_J_vanishes_on_continuous_function():
    # x(1-x)y(1-y) lies in the p = 4 space and has zero trace on the square
    s = DGSpace(meshes("square")[0], 4)
    c = interpolate(s, lambda x: x[..., 0] * (1 - x[..., 0]) * x[..., 1] * (1 - x[..., 1]))
    J = assemble_J(s)
    assert abs(c @ (J @ c)) <= 1e-18 * np.abs(J.data).max() + 1e-12


def test_B_theta_one_is_B_star_plus_J():
    s = DGSpace(meshes("disk")[0], 2)
    B1 = dense(assemble_B_theta(s, 1.0))
    ref = dense(assemble_B_star(s)) + dense(assemble_J(s))
    np.testing.assert_allclose(B1, ref, atol=1e-11 * np.abs(ref).max())


@pytest.mark.parametrize("name", ["disk", "square"])
def test_A_identity_equals_B_half(name):
    s = DGSpace(meshes(name)[0], 3)
    _, coeffs = get_problem("exp1")
    A = dense(assemble_A(s, coeffs))
    B = dense(assemble_B_theta(s, 0.5))
    np.testing.assert_allclose(A, B, atol=1e-11 * np.abs(B).max())


@pytest.mark.parametrize("p", [2, 3])
def test_square_matches_polytopal_reference(p):
    s = DGSpace(meshes("square")[0], p)
    A = dense(assemble_A(s, laplace_problem(), PenaltyConfig(curvature_terms=False)))
    R = polytopal_B_half(s)
    assert np.abs(A - R).max() <= 1e-12 * np.abs(R).max()


def test_exp2_coercivity(rng):
    m = meshes("disk")[0]
    s = DGSpace(m, 2)
    _, coeffs = get_problem("exp2")
    eps = check_cordes(coeffs, domain_samples(m)).epsilon
    kappa = min(2.0, 0.5 * (1 + 1 / (1 - eps)))
    bound = 2 * kappa / (1 - kappa * (1 - eps))
    cfg = calibrate_penalty(s, PenaltyConfig())
    pen = penalties(m, cfg)
    A = assemble_A(s, coeffs, cfg, pen)
    N = assemble_matrix(s, norm_weights(1.0, cfg.c_star), config=cfg, pen=pen)
    V = rng.normal(size=(s.n_dofs, 100))
    a = np.einsum("ik,ik->k", V, A @ V)
    n = np.einsum("ik,ik->k", V, N @ V)
    assert np.all(a > 0)
    assert np.all(n <= bound * a)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def test_rhs_zero_g_matches_homogeneous():
    s = DGSpace(meshes("disk")[0], 2)
    _, coeffs = get_problem("exp1")
    zero = BoundaryData(lambda x: 0 * x[..., 0], lambda x: 0 * x, lambda x: np.zeros(x.shape + (2,)))
    np.testing.assert_allclose(assemble_rhs(s, coeffs, g=zero), assemble_rhs(s, coeffs),
                               atol=1e-14)


def test_rhs_zero_data():
    s = DGSpace(meshes("keyhole")[0], 2)
    coeffs = CoefficientField(2, identity_coefficients, lambda x: 0 * x[..., 0])
    zero = BoundaryData(lambda x: 0 * x[..., 0], lambda x: 0 * x, lambda x: np.zeros(x.shape + (2,)))
    assert not assemble_rhs(s, coeffs, g=zero).any()


def test_rhs_missing_derivatives():
    s = DGSpace(meshes("disk")[0], 2)
    _, coeffs = get_problem("exp1")
    with pytest.raises(ConfigurationError):
        assemble_rhs(s, coeffs, g=BoundaryData(lambda x: x[..., 0]))


def test_rhs_boundary_data_only_on_boundary_elements():
    m = meshes("keyhole")[0]
    s = DGSpace(m, 2)
    _, coeffs = get_problem("exp3")
    diff = (assemble_rhs(s, coeffs, g=coeffs.boundary_data_g) - assemble_rhs(s, coeffs))
    diff = np.abs(diff.reshape(m.n_elements, -1)).max(axis=1)
    on_data = np.unique(m.boundary_faces[np.isin(m.boundary_faces[:, 2], [2, 3, 4]), 0])
    off = np.setdiff1d(np.arange(m.n_elements), on_data)
    assert not diff[off].any()
    assert diff[on_data].min() > 0


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------

def test_I5_block_psd():
    s = DGSpace(meshes("disk")[0], 3)
    M = dense(assemble_matrix(s, {"curv_tGt": 1.0}))
    M = 0.5 * (M + M.T)
    assert np.linalg.eigvalsh(M).min() >= -1e-10


def test_nGt_term_vanishes_on_disk():
    s = DGSpace(meshes("disk")[0], 3)
    M = dense(assemble_matrix(s, {"curv_nGt": 1.0}))
    assert np.abs(M).max() <= 1e-12


@pytest.mark.parametrize("name", ["disk", "keyhole"])
def test_sparsity_couples_face_neighbours(name):
    m = meshes(name)[0]
    s = DGSpace(m, 2)
    _, coeffs = get_problem("exp2")
    A = assemble_A(s, coeffs).tocsr()
    assert A.shape == (s.n_dofs, s.n_dofs)
    nb = s.n_local
    pattern = set(zip(*(A.nonzero()[0] // nb, A.nonzero()[1] // nb)))
    allowed = {(k, k) for k in range(m.n_elements)}
    allowed |= set(zip(m.interior_faces[:, 0], m.interior_faces[:, 1]))
    allowed |= set(zip(m.interior_faces[:, 1], m.interior_faces[:, 0]))
    assert pattern <= allowed


def test_thread_count_determinism(monkeypatch):
    s = DGSpace(meshes("disk")[1], 3)
    _, coeffs = get_problem("exp2")
    out = []
    for n in ("1", "4"):
        monkeypatch.setenv("DG_THREADS", n)
        A = assemble_A(s, coeffs).tocsr()
        out.append((A.indptr.copy(), A.indices.copy(), A.data.copy()))
    for a, b in zip(*out):
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# stability and calibration
# ---------------------------------------------------------------------------

def test_calibration_doubles_and_caps():
    s = DGSpace(meshes("square")[0], 4)
    cfg = calibrate_penalty(s, PenaltyConfig(c_stab=10))
    assert cfg.c_stab in (10, 20, 40, 80)
    assert stability_violations(s, cfg) == 0
    tiny = calibrate_penalty(s, PenaltyConfig(c_stab=1e-3), max_factor=2)
    assert tiny.c_stab <= 2e-3


def test_stability_eigenvalue_grows_with_penalty():
    s = DGSpace(meshes("disk")[0], 2)
    a = stability_eigenvalue(s, PenaltyConfig(c_stab=10))
    b = stability_eigenvalue(s, PenaltyConfig(c_stab=40))
    assert b > a


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.25, 0.5, 1.0]))
def test_stability_random_vectors_disk(seed, theta):
    s = DGSpace(meshes("disk")[0], 2)
    cfg = calibrate_penalty(s, PenaltyConfig())
    L = assemble_matrix(s, b_theta_weights(theta), config=cfg)
    R = assemble_matrix(s, stability_rhs_weights(theta), config=cfg)
    v = np.random.default_rng(seed).normal(size=s.n_dofs)
    assert 2.0 * (v @ (L @ v)) >= v @ (R @ v)
