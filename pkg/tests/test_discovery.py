"""Init, K-Means, and the eigenvalue-guarded EM loop."""

import io

import numpy as np
import pytest

from rolealign.discovery import (
    DiscoveryConfig,
    EmTrace,
    Formation,
    _component_log_pdfs,
    _e_step,
    canonical_order,
    discover_formation,
    em_step_full,
    em_step_spherical,
    kmeans,
    player_mean_init,
)
from rolealign.geometry import Gaussian2D, gaussian_log_pdf
from rolealign.ingest import Dataset, Frame, flatten


def frames_from_points(pts, per_frame):
    pts = np.asarray(pts)
    ids = tuple(str(i) for i in range(per_frame))
    return Dataset(frames=tuple(
        Frame(frame_id=i, positions=pts[i * per_frame:(i + 1) * per_frame],
              agent_ids=ids)
        for i in range(len(pts) // per_frame)))


def random_formation(rng, k):
    means = rng.normal(size=(k, 2)) * 4
    comps = tuple(Gaussian2D(mean=m, cov=np.eye(2), weight=1.0 / k)
                  for m in means)
    return Formation(components=comps)


# init


def test_player_mean_init_hand_values():
    f0 = Frame(frame_id=0, positions=[[0.0, 0.0], [2.0, 2.0]],
               agent_ids=("b", "a"))
    f1 = Frame(frame_id=1, positions=[[4.0, 0.0], [2.0, 0.0]],
               agent_ids=("a", "b"))
    init = player_mean_init(Dataset(frames=(f0, f1)))
    # sorted ids (a, b); a averages (2,2) and (4,0), b averages (0,0) and (2,0)
    assert np.array_equal(init, [[3.0, 1.0], [1.0, 0.0]])


def test_player_mean_init_missing_agent():
    f0 = Frame(frame_id=0, positions=[[0.0, 0.0]], agent_ids=("a",))
    f1 = Frame(frame_id=1, positions=[[1.0, 1.0]], agent_ids=("b",))
    with pytest.raises(ValueError, match="agent 'a' missing from frame 1"):
        player_mean_init(Dataset(frames=(f0, f1)))


# K-Means


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(0)
    blobs = np.concatenate([rng.normal((0.0, 0.0), 0.1, (30, 2)),
                            rng.normal((10.0, 0.0), 0.1, (30, 2))])
    km = kmeans(blobs, np.array([[1.0, 0.0], [9.0, 0.0]]))
    assert np.allclose(km.centers[0], blobs[:30].mean(axis=0))
    assert np.allclose(km.centers[1], blobs[30:].mean(axis=0))
    assert np.array_equal(km.labels[:30], np.zeros(30))
    assert np.array_equal(km.labels[30:], np.ones(30))


def test_kmeans_inertia_nonincreasing():
    rng = np.random.default_rng(1)
    for _ in range(10):
        pts = rng.normal(size=(80, 2)) * 3
        init = pts[rng.choice(80, size=4, replace=False)]
        km = kmeans(pts, init)
        inert = np.array(km.inertia)
        assert np.all(np.diff(inert) <= 1e-9)


def test_kmeans_exact_init_stops_after_one_pass():
    rng = np.random.default_rng(0)
    blobs = np.concatenate([rng.normal((0.0, 0.0), 0.1, (30, 2)),
                            rng.normal((10.0, 0.0), 0.1, (30, 2))])
    init = np.stack([blobs[:30].mean(axis=0), blobs[30:].mean(axis=0)])
    km = kmeans(blobs, init)
    assert km.n_iterations == 1
    assert np.array_equal(km.centers, init)


def test_kmeans_reseeds_empty_clusters():
    # both centers start on the left blob; the right blob must be claimed
    rng = np.random.default_rng(2)
    pts = np.concatenate([rng.normal((0.0, 0.0), 0.2, (40, 2)),
                          rng.normal((20.0, 0.0), 0.2, (40, 2))])
    km = kmeans(pts, np.array([[0.0, 0.1], [0.0, -0.1]]))
    assert len(set(km.labels.tolist())) == 2
    assert sorted(np.round(km.centers[:, 0], 0).tolist()) == [0.0, 20.0]


def test_kmeans_does_not_mutate_init():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 2))
    init = pts[:3].copy()
    before = init.copy()
    kmeans(pts, init)
    assert np.array_equal(init, before)


def test_kmeans_k_exceeds_points():
    with pytest.raises(ValueError, match="k=3 exceeds point count 2"):
        kmeans(np.zeros((2, 2)), np.zeros((3, 2)))


def test_canonical_order_lexicographic():
    pts = np.array([[1.0, 5.0], [0.0, 2.0], [1.0, -1.0], [0.0, 1.0]])
    order = canonical_order(pts)
    assert np.array_equal(pts[order],
                          [[0.0, 1.0], [0.0, 2.0], [1.0, -1.0], [1.0, 5.0]])


# EM updates


def test_em_full_step_never_decreases_loglik():
    rng = np.random.default_rng(4)
    for _ in range(10):
        k = int(rng.integers(2, 6))
        state = random_formation(rng, k)
        pts = rng.normal(size=(150, 2)) * 3
        _, before = _e_step(state, pts)
        new = em_step_full(state, pts)
        _, after = _e_step(new, pts)
        assert after >= before - 1e-8


def test_spherical_step_gives_isotropic_covariances():
    rng = np.random.default_rng(5)
    state = random_formation(rng, 3)
    pts = rng.normal(size=(120, 2)) * 2
    new = em_step_spherical(state, pts)
    log_resp, _ = _e_step(state, pts)
    resp = np.exp(log_resp)
    counts = resp.sum(axis=0)
    means = (resp.T @ pts) / counts[:, None]
    for j, c in enumerate(new.components):
        assert c.cov[0, 1] == 0.0 and c.cov[1, 0] == 0.0
        assert c.cov[0, 0] == c.cov[1, 1]
        d = pts - means[j]
        expect = 0.5 * (resp[:, j] * (d * d).sum(axis=1)).sum() / counts[j]
        assert c.cov[0, 0] == pytest.approx(expect, rel=1e-12)


def test_component_log_pdfs_matches_single_gaussian():
    rng = np.random.default_rng(6)
    comps = []
    for _ in range(4):
        a = rng.normal(size=(2, 2))
        comps.append(Gaussian2D(mean=rng.normal(size=2),
                                cov=a @ a.T + 0.5 * np.eye(2), weight=0.25))
    f = Formation(components=tuple(comps))
    pts = rng.normal(size=(30, 2)) * 3
    dens = _component_log_pdfs(f, pts)
    assert dens.shape == (30, 4)
    for j, c in enumerate(comps):
        assert np.allclose(dens[:, j], gaussian_log_pdf(c, pts), atol=1e-12)


# the discovery loop


def test_discovery_recovers_separated_mixture():
    rng = np.random.default_rng(7)
    centers = np.array([[-6.0, 0.0], [0.0, 6.0], [6.0, 0.0]])
    pts = np.concatenate([rng.normal(c, 0.8, (200, 2)) for c in centers])
    ds = frames_from_points(rng.permutation(pts), per_frame=3)
    f, trace = discover_formation(ds, DiscoveryConfig(k=3, init_mode="random",
                                                      seed=0))
    assert trace.converged
    got = f.means[np.argsort(f.means[:, 0])]
    assert np.abs(got - centers).max() < 0.2
    assert np.abs(f.weights - 1 / 3).max() < 0.05


def test_full_updates_monotone_in_trace():
    rng = np.random.default_rng(8)
    pts = np.concatenate([rng.normal((-4.0, 0.0), 1.0, (150, 2)),
                          rng.normal((4.0, 0.0), 1.0, (150, 2))])
    ds = frames_from_points(pts, per_frame=2)
    _, trace = discover_formation(ds, DiscoveryConfig(k=2, init_mode="random"))
    lls = trace.logliks
    kinds = trace.update_kinds
    for i in range(1, len(lls)):
        if kinds[i] == "FullGMM":
            assert lls[i] >= lls[i - 1] - 1e-8


def test_guard_triggers_spherical_updates_on_stripes():
    rng = np.random.default_rng(9)
    pts = np.concatenate([rng.normal((-10.0, 0.0), (5.0, 1.0), (200, 2)),
                          rng.normal((10.0, 0.0), (5.0, 1.0), (200, 2))])
    ds = frames_from_points(pts, per_frame=2)
    _, trace = discover_formation(ds, DiscoveryConfig(k=2, init_mode="random",
                                                      seed=1, max_iters=40))
    assert "SoftKMeans" in trace.update_kinds
    assert trace.update_kinds[0] == "Init"


def test_k1_matches_sample_moments():
    rng = np.random.default_rng(10)
    pts = rng.normal((3.0, -2.0), (1.0, 1.2), (400, 2))
    ds = frames_from_points(pts, per_frame=1)
    f, trace = discover_formation(ds, DiscoveryConfig(k=1, init_mode="random"))
    flat = flatten(ds)
    assert np.allclose(f.components[0].mean, flat.mean(axis=0), atol=1e-12)
    assert np.allclose(f.components[0].cov, np.cov(flat.T, bias=True),
                       atol=1e-12)
    assert f.components[0].weight == 1.0
    assert trace.converged


def test_cache_equals_direct_densities_in_caller_order():
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(90, 2)) * 3
    ds = frames_from_points(pts, per_frame=3)
    f, trace = discover_formation(ds, DiscoveryConfig(k=3, init_mode="random"))
    assert trace.cache.shape == (90, 3)
    assert np.allclose(trace.cache, _component_log_pdfs(f, flatten(ds)),
                       atol=0, rtol=0)


def test_row_permutation_cannot_change_the_result():
    rng = np.random.default_rng(12)
    pts = rng.normal(size=(40, 2)) * 5
    ids = ("p0", "p1", "p2", "p3")
    frames_a, frames_b = [], []
    for i in range(10):
        block = pts[4 * i:4 * i + 4]
        perm = rng.permutation(4)
        frames_a.append(Frame(frame_id=i, positions=block, agent_ids=ids))
        frames_b.append(Frame(frame_id=i, positions=block[perm],
                              agent_ids=tuple(ids[j] for j in perm)))
    cfg = DiscoveryConfig(k=4, max_iters=60)
    fa, ta = discover_formation(Dataset(frames=tuple(frames_a)), cfg)
    fb, tb = discover_formation(Dataset(frames=tuple(frames_b)), cfg)
    assert fa.to_dict() == fb.to_dict()   # bit-identical, not just close
    assert ta.logliks == tb.logliks


def test_discovery_reproducible():
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(60, 2)) * 4
    ds = frames_from_points(pts, per_frame=3)
    cfg = DiscoveryConfig(k=3, init_mode="random", seed=5)
    fa, ta = discover_formation(ds, cfg)
    fb, tb = discover_formation(ds, cfg)
    assert fa.to_dict() == fb.to_dict()
    assert ta.logliks == tb.logliks


def test_max_iters_one_runs_exactly_one_update():
    rng = np.random.default_rng(9)
    pts = np.concatenate([rng.normal((-10.0, 0.0), (5.0, 1.0), (100, 2)),
                          rng.normal((10.0, 0.0), (5.0, 1.0), (100, 2))])
    ds = frames_from_points(pts, per_frame=2)
    _, trace = discover_formation(ds, DiscoveryConfig(k=2, init_mode="random",
                                                      max_iters=1))
    assert len(trace.rows) == 2
    assert not trace.converged


def test_player_means_init_requires_matching_k():
    rng = np.random.default_rng(14)
    ds = frames_from_points(rng.normal(size=(20, 2)), per_frame=4)
    with pytest.raises(ValueError, match="4 centers but k=2"):
        discover_formation(ds, DiscoveryConfig(k=2))


def test_k_exceeds_total_points():
    ds = frames_from_points(np.zeros((2, 2)) + [[0.0, 0.0], [1.0, 1.0]],
                            per_frame=1)
    with pytest.raises(ValueError, match="exceeds total point count"):
        discover_formation(ds, DiscoveryConfig(k=5, init_mode="random"))


# containers and config


def test_formation_validation():
    with pytest.raises(ValueError, match="at least one component"):
        Formation(components=())
    bad = (Gaussian2D(mean=[0, 0], cov=np.eye(2), weight=0.6),
           Gaussian2D(mean=[1, 1], cov=np.eye(2), weight=0.6))
    with pytest.raises(ValueError, match="weights sum to"):
        Formation(components=bad)


def test_formation_properties_and_roundtrip():
    comps = (Gaussian2D(mean=[0.0, 1.0], cov=np.diag([4.0, 1.0]), weight=0.25),
             Gaussian2D(mean=[2.0, 3.0], cov=np.eye(2), weight=0.75))
    f = Formation(components=comps)
    assert f.k == 2
    assert np.array_equal(f.weights, [0.25, 0.75])
    assert np.array_equal(f.means, [[0.0, 1.0], [2.0, 3.0]])
    assert np.allclose(f.eigenvalue_ratios(), [4.0, 1.0])
    back = Formation.from_dict(f.to_dict())
    assert back.to_dict() == f.to_dict()


def test_discovery_config_validation():
    with pytest.raises(ValueError, match="k must be >= 1"):
        DiscoveryConfig(k=0)
    with pytest.raises(ValueError, match="eig_ratio_bound must exceed 1"):
        DiscoveryConfig(eig_ratio_bound=1.0)
    with pytest.raises(ValueError, match="tolerances must be positive"):
        DiscoveryConfig(em_tol=0.0)
    with pytest.raises(ValueError, match="unknown init_mode 'grid'"):
        DiscoveryConfig(init_mode="grid")


def test_trace_csv_format():
    trace = EmTrace()
    trace.append(0, -3.5, "Init", (1.2, 2.3659))
    trace.append(1, -3.25, "FullGMM", (1.1, 1.4))
    buf = io.StringIO()
    trace.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,loglik,update_kind,max_eig_ratio"
    assert lines[1] == "0,-3.5,Init,2.3659"
    assert lines[2] == "1,-3.25,FullGMM,1.4"
