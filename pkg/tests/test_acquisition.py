import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobo import simcfr
from mobo.acquisition import (
    DEDUPE_RADIUS,
    DEFAULT_ACQUISITIONS,
    AcquisitionSpec,
    ArchiveEntry,
    ParetoArchive,
    dominates,
    generate_batch,
    nondominated_filter,
    pareto_update,
    scalarize_epsilon,
    scalarize_fixed,
    surrogate_objectives,
)
from mobo.doe import LhsConfig, latin_hypercube
from mobo.problem import REACTOR_VARIABLES, DesignPoint, embed, unembed
from mobo.surrogate import fit

from conftest import design


def entry(f, i=0):
    return ArchiveEntry(design(50, 100, 1), tuple(float(v) for v in f), i)


def brute_force(vectors):
    """Pairwise scan, independent of pareto_update."""
    keep = set()
    for i, u in enumerate(vectors):
        beaten = False
        for j, v in enumerate(vectors):
            if j == i:
                continue
            if all(a <= b for a, b in zip(v, u)) and tuple(v) != tuple(u):
                beaten = True
            if tuple(v) == tuple(u) and j < i:
                beaten = True
        if not beaten:
            keep.add(i)
    return keep


@pytest.mark.parametrize(
    "f, w, expected", [((-30, 5), (0.5, 0.5), -12.5), ((7.0, 3.0), (1, 0), 7.0), ((0, 0), (0.5, 0.5), 0.0)]
)
def test_scalarize_fixed(f, w, expected):
    assert scalarize_fixed(f, w) == expected


def test_scalarize_fixed_dimension_mismatch():
    with pytest.raises(ValueError):
        scalarize_fixed((1, 2), (1.0,))


def test_scalarize_epsilon_examples():
    assert scalarize_epsilon((-30, 5), 0, (np.inf, 10), 100) == -30
    assert scalarize_epsilon((-30, 12), 0, (np.inf, 10), 100) == pytest.approx(-30 + 100 * (12 - 10) ** 2)
    assert scalarize_epsilon((-30, 12), 0, (np.inf, 10), 100) == 370
    assert scalarize_epsilon((4.0, 1e9), 0, (np.inf, np.inf), 100) == 4.0
    # target objective never penalized
    assert scalarize_epsilon((50.0, 1.0), 0, (0.0, 10.0), 100) == 50.0


def test_acquisition_spec_invariants():
    assert DEFAULT_ACQUISITIONS[2].weights == (0.5, 0.5)
    assert [a.target_index for a in DEFAULT_ACQUISITIONS[:2]] == [0, 1]
    with pytest.raises(ValueError):
        AcquisitionSpec("fixed-weight", weights=(0.7, 0.7))
    with pytest.raises(ValueError):
        AcquisitionSpec("epsilon-constraint", weights=(0.5, 0.5), target_index=0)


def test_pareto_update_examples():
    a = pareto_update(ParetoArchive((entry((2, 3), 0),)), entry((1, 2), 1))
    assert [e.objectives for e in a] == [(1, 2)]
    b = pareto_update(ParetoArchive((entry((1, 2), 0),)), entry((2, 3), 1))
    assert [e.objectives for e in b] == [(1, 2)]


def test_pareto_tie_keeps_earlier_index():
    a = pareto_update(ParetoArchive((entry((1, 2), 5),)), entry((1, 2), 7))
    assert a.indices() == [5]
    b = pareto_update(ParetoArchive((entry((1, 2), 7),)), entry((1, 2), 5))
    assert b.indices() == [5]


def test_stream_200_matches_brute_force(rng):
    F = rng.random((200, 2))
    a = ParetoArchive()
    for i, f in enumerate(F):
        a = pareto_update(a, entry(f, i))
        assert not any(dominates(x.objectives, y.objectives) for x in a for y in a)
    assert set(a.indices()) == brute_force(F.tolist())
    assert set(nondominated_filter(F)) == brute_force(F.tolist())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=30), st.randoms())
def test_archive_order_invariant(vectors, rnd):
    items = [entry(v, i) for i, v in enumerate(vectors)]
    a = ParetoArchive()
    for e in items:
        a = pareto_update(a, e)
    shuffled = items[:]
    rnd.shuffle(shuffled)
    b = ParetoArchive()
    for e in shuffled:
        b = pareto_update(b, e)
    assert a.indices() == b.indices()
    assert set(a.indices()) == brute_force(vectors)


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=20),
       st.floats(0.01, 0.99), st.floats(0.01, 100))
def test_fixed_argmin_scale_invariant(F, w0, c):
    w = np.array([w0, 1 - w0])
    a = int(np.argmin([float(w @ f) for f in np.array(F)]))
    b = int(np.argmin([float((c * w) @ f) for f in np.array(F)]))
    assert np.isclose(float(w @ np.array(F[a])), float(w @ np.array(F[b])))


def _lhs_models(n=15, seed=7):
    X = latin_hypercube(LhsConfig(n, 3, seed))
    designs = [unembed(x) for x in X]
    truth = [simcfr.ground_truth(*d.values()) for d in designs]
    prod = fit(X, [t[0] for t in truth])
    byp = fit(X, [t[1] for t in truth])
    archive = ParetoArchive()
    for i, (d, t) in enumerate(zip(designs, truth)):
        archive = pareto_update(archive, ArchiveEntry(d, (-t[0], t[1]), i))
    return (prod, byp), archive, X


def test_generate_batch_three_feasible_points():
    models, archive, X = _lhs_models()
    batch = generate_batch(models, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(0), evaluated=X)
    assert len(batch) == 3
    for p in batch:
        p.validate(REACTOR_VARIABLES)
    E = np.array([embed(p) for p in batch])
    for i in range(3):
        assert np.min(np.linalg.norm(X - E[i], axis=1)) >= DEDUPE_RADIUS
        for j in range(i):
            assert np.linalg.norm(E[i] - E[j]) >= DEDUPE_RADIUS


def test_generate_batch_improves_on_archive():
    models, archive, X = _lhs_models()
    batch = generate_batch(models, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(1), evaluated=X)
    w = (0.5, 0.5)
    best_archive = min(scalarize_fixed(e.objectives, w) for e in archive)
    predicted = [scalarize_fixed(surrogate_objectives(models, embed(p)), w) for p in batch]
    assert min(predicted) <= best_archive


def test_generate_batch_single_entry_archive():
    X = latin_hypercube(LhsConfig(6, 3, 3))
    flat = (fit(X, np.full(6, 50.0)), fit(X, np.full(6, 10.0)))
    d0 = unembed(X[0])
    archive = ParetoArchive((ArchiveEntry(d0, (-50.0, 10.0), 0),))
    batch = generate_batch(flat, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(2), evaluated=X)
    E = np.array([embed(p) for p in batch])
    assert len(batch) == 3
    for i in range(3):
        for j in range(i):
            assert np.linalg.norm(E[i] - E[j]) >= DEDUPE_RADIUS
        assert np.min(np.linalg.norm(X - E[i], axis=1)) >= DEDUPE_RADIUS


def test_generate_batch_deterministic():
    models, archive, X = _lhs_models()
    a = generate_batch(models, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(5), evaluated=X)
    b = generate_batch(models, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(5), evaluated=X)
    assert a == b


def test_generate_batch_empty_archive():
    models, _, X = _lhs_models()
    with pytest.raises(ValueError):
        generate_batch(models, ParetoArchive(), DEFAULT_ACQUISITIONS, np.random.default_rng(0))
