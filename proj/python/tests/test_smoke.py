import math
import pathlib

import numpy as np
import pytest

import wbmorph

DATA = pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"


def blob(shape, r, c, width=1.5):
    rows, cols = np.mgrid[0 : shape[0], 0 : shape[1]]
    return np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2 * width**2))


def test_measure_normalizes_image():
    m = wbmorph.GridMeasure.from_image(blob((8, 8), 3, 4))
    assert m.shape == wbmorph.GridShape(8, 8)
    assert m.image.shape == (8, 8)
    assert math.isclose(m.mass.sum(), 1.0, abs_tol=1e-12)
    assert m.mean_row() == pytest.approx(3.0, abs=0.05)


def test_sinkhorn_close_to_exact_on_small_grid():
    rng = np.random.default_rng(3)
    shape = wbmorph.GridShape(4, 4)
    cost = wbmorph.GroundCost(shape, 1e-3)
    p = wbmorph.GridMeasure.from_image(rng.random((4, 4)) + 0.05)
    q = wbmorph.GridMeasure.from_image(rng.random((4, 4)) + 0.05)
    res = wbmorph.sinkhorn(p, q, cost)
    assert res.converged
    assert res.cost == pytest.approx(wbmorph.exact_lp_transport(p, q, cost), rel=0.05)


def test_identity_prior_matches_plain_barycenter():
    shape = wbmorph.GridShape(10, 10)
    cost = wbmorph.GroundCost(shape)
    a = wbmorph.GridMeasure.from_image(blob((10, 10), 2, 2))
    b = wbmorph.GridMeasure.from_image(blob((10, 10), 7, 6))
    res = wbmorph.constrained_barycenter([a, b], [0.5, 0.5], wbmorph.IdentityProjector(), cost)
    plain = wbmorph.entropic_barycenter([a, b], [0.5, 0.5], cost)
    assert res.converged
    assert wbmorph.total_variation(res.measure, plain) <= 0.02


def test_morph_and_evaluate():
    shape = wbmorph.GridShape(1, 32)
    cost = wbmorph.GroundCost(shape)
    frames = wbmorph.morph(
        wbmorph.GridMeasure.dirac(shape, 4),
        wbmorph.GridMeasure.dirac(shape, 20),
        3,
        wbmorph.IdentityProjector(),
        cost,
    )
    assert len(frames) == 5
    assert [f.mean_col() for f in frames] == pytest.approx([4, 8, 12, 16, 20], abs=0.5)
    report = wbmorph.evaluate(frames, cost, wbmorph.IdentityProjector())
    assert len(report["per_step_distances"]) == 4
    assert report["regularity"] < 0.05 * report["total_distance"]


def test_omp_recovers_planted_code():
    rng = np.random.default_rng(5)
    atoms = rng.standard_normal((32, 64))
    atoms /= np.linalg.norm(atoms, axis=0)
    d = wbmorph.Dictionary(atoms)
    y = 2.0 * atoms[:, 7] - 1.5 * atoms[:, 40]
    code = wbmorph.omp(y, d, 2)
    assert sorted(code.support) == [7, 40]
    assert np.allclose(code.reconstruct(d), y)


def test_sparse_prior_on_mnist(tmp_path):
    train = wbmorph.load_idx(DATA / "mnist-train-images-idx3-ubyte")
    assert train.image(0).shape == (28, 28)
    samples = np.stack([train.measure(i).mass for i in range(400)], axis=1)
    d = wbmorph.learn_dictionary(samples, 32, 4, 2, seed=1)
    d.save(tmp_path / "dict.bin")
    again = wbmorph.Dictionary.load(tmp_path / "dict.bin")
    assert np.array_equal(again.atoms, d.atoms)

    proj = wbmorph.SparseProjector(d, sparsity=4)
    out = proj.project(samples[:, 0], train.shape, seed=1)
    assert math.isclose(out.mass.sum(), 1.0, abs_tol=1e-9)
    assert out.mass.min() >= 0.0

    wbmorph.write_pgm(out, tmp_path / "frame.pgm")
    assert wbmorph.read_pgm(tmp_path / "frame.pgm").max() == 255


def test_errors_carry_codes(tmp_path):
    with pytest.raises(wbmorph.WbmorphError) as info:
        wbmorph.GridMeasure.from_image(np.zeros((3, 3)))
    assert info.value.code == "AllZeroInput"
    with pytest.raises(wbmorph.WbmorphError) as info:
        wbmorph.load_idx(tmp_path / "missing")
    assert info.value.code == "IoError"
