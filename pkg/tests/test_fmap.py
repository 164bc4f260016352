import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_nearest, random_rotation, regular_tet, wks_loops

from volfmaps.basis import RankDeficiencyError
from volfmaps.fmap import (
    MatchConfig,
    compute_wks,
    descriptors,
    estimate_fmap,
    extract_p2p,
    farthest_point_sampling,
    fmap_from_p2p,
    landmark_descriptors,
    load_fmap_csv,
    match_volumes,
    nearest_neighbors,
    prepare_shape,
    save_fmap_csv,
    zoomout,
)
from volfmaps.laplacian import assemble_volume_operators
from volfmaps.mesh import Correspondence, TetMesh, cube_mesh
from volfmaps.metrics import geodesic_error_stats
from volfmaps.spectral import SpectralBasis, compute_eigenbasis


@pytest.fixture(scope="module")
def cube_lbo():
    m = cube_mesh(3)
    return compute_eigenbasis(assemble_volume_operators(m), 30)


def _flip_signs(basis, seed):
    s = np.random.default_rng(seed).choice([-1.0, 1.0], basis.k)
    s[0] = 1.0
    return SpectralBasis(basis.functions * s, basis.eigenvalues, basis.mass)


# ---------------------------------------------------------------- descriptors


def test_wks_matches_loop_oracle(cube_lbo):
    b = cube_lbo.truncated(12)
    np.testing.assert_allclose(compute_wks(b, 9), wks_loops(b.functions, b.eigenvalues, 9), rtol=1e-10, atol=1e-14)


@given(st.integers(0, 10_000))
def test_wks_sign_invariant(seed):
    b = compute_eigenbasis(assemble_volume_operators(cube_mesh(2)), 15)
    np.testing.assert_allclose(compute_wks(_flip_signs(b, seed), 20), compute_wks(b, 20), atol=1e-14)


def test_wks_k2_is_phi1_squared(cube_lbo):
    b = cube_lbo.truncated(2)
    d = compute_wks(b, 5)
    for e in range(5):
        np.testing.assert_allclose(d[:, e], b.functions[:, 1] ** 2, rtol=1e-12)


def test_landmarks_separate_symmetric_vertices():
    # every vertex of a regular tet looks the same to the WKS
    b = compute_eigenbasis(assemble_volume_operators(TetMesh(*regular_tet())), 4)
    w = compute_wks(b, 6)
    np.testing.assert_allclose(w, np.broadcast_to(w[0], w.shape), rtol=1e-10)
    lm = landmark_descriptors(b, [0], 6)
    assert lm.shape == (4, 6)
    assert (lm[0] > lm[1:]).all()
    np.testing.assert_allclose(lm[1:], np.broadcast_to(lm[1], (3, 6)), rtol=1e-10)
    assert descriptors(b, 6, [0, 2]).shape == (4, 18)


@given(st.integers(0, 10_000))
def test_landmark_descriptors_sign_invariant(seed):
    b = compute_eigenbasis(assemble_volume_operators(cube_mesh(2)), 15)
    np.testing.assert_allclose(
        landmark_descriptors(_flip_signs(b, seed), [0, 7], 8), landmark_descriptors(b, [0, 7], 8), atol=1e-13
    )


def test_descriptor_errors(cube_lbo):
    with pytest.raises(ValueError):
        compute_wks(cube_lbo.truncated(1))
    bad = SpectralBasis(cube_lbo.functions[:, :3], np.array([0.0, 0.0, 1.0]), cube_lbo.mass)
    with pytest.raises(ValueError, match="positive"):
        compute_wks(bad)


# ---------------------------------------------------------------- estimate_fmap


def test_self_map_is_identity(bar_lbo, bar_landmarks):
    b = bar_lbo.truncated(20)
    d = descriptors(bar_lbo, 100, list(bar_landmarks))
    C = estimate_fmap(d, d, b, b, 20)
    np.testing.assert_allclose(C, np.eye(20), atol=1e-8)


def test_commutativity_penalty_decreases_with_weight(bent30, bar_landmarks):
    M, N, _ = bent30
    cfg = MatchConfig(landmarks_M=bar_landmarks, landmarks_N=bar_landmarks, k_final=20)
    sM, sN = prepare_shape(M, cfg), prepare_shape(N, cfg)
    dM = descriptors(sM.lbo, 50, list(bar_landmarks))
    dN = descriptors(sN.lbo, 50, list(bar_landmarks))

    lm, ln = sM.basis.eigenvalues[:10], sN.basis.eigenvalues[:10]
    D = (lm[:, None] - ln[None, :]) ** 2

    def penalty(mu):
        return float((estimate_fmap(dM, dN, sM.basis, sN.basis, 10, mu_comm=mu) ** 2 * D).sum())

    # regularised least squares: the penalised term never grows with its weight
    p = [penalty(mu) for mu in (0.0, 1e-2, 1.0, 1e2, 1e4)]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(p, p[1:]))
    assert p[-1] < p[0] / 10


def test_bent_initial_map_near_identity(bent30, bar_landmarks):
    M, N, _ = bent30
    cfg = MatchConfig(landmarks_M=bar_landmarks, landmarks_N=bar_landmarks, k_final=30)
    sM, sN = prepare_shape(M, cfg), prepare_shape(N, cfg)
    dM = descriptors(sM.lbo, 100, list(bar_landmarks))
    dN = descriptors(sN.lbo, 100, list(bar_landmarks))
    C = estimate_fmap(dM, dN, sM.basis, sN.basis, 20)
    assert abs(C[0, 0]) > 0.99
    assert abs(C[1, 1]) > 0.9


def test_symmetric_wks_only_is_singular(bar_lbo):
    # WKS without landmarks cannot resolve the bar's reflections
    b = bar_lbo.truncated(20)
    d = compute_wks(bar_lbo, 100)
    with pytest.raises(RankDeficiencyError, match="singular"):
        estimate_fmap(d, d, b, b, 20, mu_comm=0.0)


def test_estimate_fmap_errors(cube_lbo):
    d = compute_wks(cube_lbo, 10)
    with pytest.raises(ValueError):
        estimate_fmap(d, d[:, :5], cube_lbo, cube_lbo, 5)
    with pytest.raises(ValueError):
        estimate_fmap(d, d, cube_lbo, cube_lbo, 31)


# ---------------------------------------------------------------- p2p


def test_identity_extraction(cube_lbo):
    pi = extract_p2p(cube_lbo, cube_lbo, np.eye(cube_lbo.k))
    np.testing.assert_array_equal(pi.map, np.arange(cube_lbo.n))


def test_zero_map_is_constant(cube_lbo):
    pi = extract_p2p(cube_lbo, cube_lbo, np.zeros((5, 5)), method="brute")
    assert (pi.map == pi.map[0]).all()
    nrm = np.linalg.norm(cube_lbo.functions[:, :5], axis=1)
    assert nrm[pi.map[0]] <= nrm.min() * (1 + 1e-9)
    # the chosen row is the smallest index among (rounding-level) ties
    assert pi.map[0] == np.flatnonzero(nrm <= nrm.min() * (1 + 1e-12))[0]


@given(st.integers(0, 10_000))
def test_nn_methods_agree_with_ties(seed):
    rng = np.random.default_rng(seed)
    data = rng.integers(-3, 4, size=(60, 3)).astype(float)  # many exact ties
    query = rng.integers(-3, 4, size=(40, 3)) + rng.choice([0.0, 0.5], size=(40, 3))
    ref = brute_nearest(query, data)
    np.testing.assert_array_equal(nearest_neighbors(query, data, "kdtree"), ref)
    np.testing.assert_array_equal(nearest_neighbors(query, data, "brute"), ref)


def test_nn_bad_method():
    with pytest.raises(ValueError):
        nearest_neighbors(np.zeros((1, 2)), np.zeros((1, 2)), "annoy")


@given(st.integers(0, 10_000))
def test_extraction_invariant_to_rotation_of_spectral_space(seed):
    b = compute_eigenbasis(assemble_volume_operators(cube_mesh(2)), 10)
    C = np.eye(10) + 0.05 * np.random.default_rng(seed).standard_normal((10, 10))
    R = random_rotation(np.random.default_rng(seed + 1), 10)
    rotN = SpectralBasis(b.functions @ R, np.full(10, np.nan), b.mass, kind="cmh")
    a = extract_p2p(b, b, C, method="brute")
    r = extract_p2p(b, rotN, C @ R, method="brute")
    np.testing.assert_array_equal(a.map, r.map)


def test_ground_truth_fmap_recovers_p2p(bent30, bar_landmarks):
    M, N, gt = bent30
    cfg = MatchConfig(landmarks_M=bar_landmarks, landmarks_N=bar_landmarks, k_final=60)
    sM, sN = prepare_shape(M, cfg), prepare_shape(N, cfg)
    C = fmap_from_p2p(gt, sM.basis, sN.basis)
    pi = extract_p2p(sM.basis, sN.basis, C)
    assert np.mean(pi.map == gt.map) >= 0.99


def test_source_and_target_rows(cube_lbo):
    rows = np.array([3, 10, 20])
    pi = extract_p2p(cube_lbo, cube_lbo, np.eye(10), source_rows=rows, target_rows=rows[::-1])
    np.testing.assert_array_equal(pi.map, rows)
    assert pi.n_target == cube_lbo.n


# ---------------------------------------------------------------- fmap_from_p2p


def test_identity_p2p_gives_identity(cube_lbo):
    C = fmap_from_p2p(Correspondence.identity(cube_lbo.n), cube_lbo, cube_lbo, 20)
    np.testing.assert_allclose(C, np.eye(20), atol=1e-12)


def test_k1_unit_volume_is_one():
    m = cube_mesh(2)
    b = compute_eigenbasis(assemble_volume_operators(m), 3)
    pi = Correspondence(np.random.default_rng(0).integers(m.n_vertices, size=m.n_vertices), m.n_vertices)
    assert fmap_from_p2p(pi, b, b, 1)[0, 0] == pytest.approx(1.0)


def test_subset_matches_full_on_single_tet(single_tet):
    b = compute_eigenbasis(assemble_volume_operators(single_tet), 4)
    pi = Correspondence(np.array([1, 0, 2, 3]), 4)
    full = fmap_from_p2p(pi, b, b, 4, source_rows=np.arange(4))
    np.testing.assert_allclose(full, fmap_from_p2p(pi, b, b, 4), atol=1e-12)


def test_partial_map_least_squares(cube_lbo):
    m = np.arange(cube_lbo.n)
    m[::7] = -1
    C = fmap_from_p2p(Correspondence(m, cube_lbo.n), cube_lbo, cube_lbo, 10)
    np.testing.assert_allclose(C, np.eye(10), atol=1e-10)


def test_fmap_from_p2p_errors(cube_lbo):
    pi = Correspondence.identity(cube_lbo.n)
    with pytest.raises(RankDeficiencyError):
        fmap_from_p2p(Correspondence(np.zeros(2, int), cube_lbo.n), cube_lbo, cube_lbo, 5, source_rows=[0, 1])
    with pytest.raises(ValueError):
        fmap_from_p2p(pi, cube_lbo, cube_lbo, 31)
    with pytest.raises(ValueError):
        fmap_from_p2p(Correspondence(np.arange(3), cube_lbo.n), cube_lbo, cube_lbo, 5)


# ---------------------------------------------------------------- zoomout


def test_zoomout_fixed_point(cube_lbo):
    C = zoomout(np.eye(5), cube_lbo, cube_lbo, 25, step=4)
    np.testing.assert_allclose(C, np.eye(25), atol=1e-10)


def test_zoomout_single_round(cube_lbo):
    C0 = np.eye(5)
    C = zoomout(C0, cube_lbo, cube_lbo, 25, step=100)
    pi = extract_p2p(cube_lbo, cube_lbo, C0)
    np.testing.assert_allclose(C, fmap_from_p2p(pi, cube_lbo, cube_lbo, 25))
    np.testing.assert_array_equal(zoomout(C0, cube_lbo, cube_lbo, 5), C0)


@pytest.mark.parametrize("args", [dict(k_final=4), dict(k_final=31), dict(k_final=10, step=0)])
def test_zoomout_errors(cube_lbo, args):
    with pytest.raises(ValueError):
        zoomout(np.eye(5), cube_lbo, cube_lbo, **args)
    with pytest.raises(ValueError):
        zoomout(np.eye(5)[:4], cube_lbo, cube_lbo, 10)


def test_zoomout_improves_bent_match(bent45, bent45_shapes):
    M, N, gt = bent45
    cfg, sM, sN = bent45_shapes
    C, _, _, C0 = match_volumes(M, N, cfg, shape_M=sM, shape_N=sN)
    age0 = geodesic_error_stats(extract_p2p(sM.basis, sN.basis, C0), gt, N)[1].age
    age = geodesic_error_stats(extract_p2p(sM.basis, sN.basis, C), gt, N)[1].age
    assert age < age0 / 2


@pytest.mark.parametrize("sampling", ["surface", "fps"])
def test_fast_zoomout_improves_initial_map(bent45, bent45_shapes, sampling):
    M, N, gt = bent45
    cfg, sM, sN = bent45_shapes
    fast = MatchConfig(landmarks_M=cfg.landmarks_M, landmarks_N=cfg.landmarks_N, fast=True, sampling=sampling, n_samples=300)
    C, _, _, C0 = match_volumes(M, N, fast, shape_M=sM, shape_N=sN)
    assert C.shape == (cfg.k_final, cfg.k_final)
    age0 = geodesic_error_stats(extract_p2p(sM.basis, sN.basis, C0), gt, N)[1].age
    age = geodesic_error_stats(extract_p2p(sM.basis, sN.basis, C), gt, N)[1].age
    assert age < age0


@pytest.mark.parametrize("kind", ["lbo", "cmh", "orthoprods"])
def test_identity_pipeline_per_kind(bar, bar_lbo, bar_landmarks, kind):
    cfg = MatchConfig(kind=kind, k_final=40, orthoprods_k0=10, landmarks_M=bar_landmarks, landmarks_N=bar_landmarks)
    s = prepare_shape(bar, cfg, lbo=bar_lbo)
    C, *_ = match_volumes(bar, bar, cfg, shape_M=s, shape_N=s)
    pi = extract_p2p(s.basis, s.basis, C)
    assert np.mean(pi.map == np.arange(bar.n_vertices)) > 0.99


def test_match_config_validation():
    with pytest.raises(ValueError):
        MatchConfig(kind="hks")
    with pytest.raises(ValueError):
        MatchConfig(k_init=50, k_final=20)
    with pytest.raises(ValueError):
        MatchConfig(landmarks_M=(1, 2))


# ---------------------------------------------------------------- misc


def test_fmap_csv_round_trip(tmp_path):
    C = np.random.default_rng(0).standard_normal((4, 6))
    save_fmap_csv(C, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().startswith("4 6\n")
    np.testing.assert_array_equal(load_fmap_csv(tmp_path / "c.csv"), C)
    (tmp_path / "bad.csv").write_text("3 3\n1,2,3\n")
    with pytest.raises(ValueError):
        load_fmap_csv(tmp_path / "bad.csv")


@given(st.integers(0, 10_000), st.integers(1, 20))
def test_fps_is_greedy(seed, n):
    pts = np.random.default_rng(seed).standard_normal((50, 3))
    idx = farthest_point_sampling(pts, n, seed=seed)
    assert len(set(idx.tolist())) == n
    for t in range(1, n):
        d = np.linalg.norm(pts[:, None] - pts[idx[:t]][None], axis=2).min(axis=1)
        assert d[idx[t]] == pytest.approx(d.max())
    np.testing.assert_array_equal(idx, farthest_point_sampling(pts, n, seed=seed))
