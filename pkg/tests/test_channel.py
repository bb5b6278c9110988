import math

import numpy as np
import pytest
from scipy.stats import norm

from neuraldec.channel import (BatchSpec, awgn_llr, batch_plan, ebn0_grid, ebn0_to_sigma, frame_rng, llr_block,
                               training_batch)
from neuraldec.codes import ParityCheckMatrix
from neuraldec.testcodes import regular_code


def test_ebn0_to_sigma():
    assert ebn0_to_sigma(0.0, 0.5) == pytest.approx(1.0)
    assert ebn0_to_sigma(3.0103, 0.5) == pytest.approx(1 / math.sqrt(2), rel=1e-5)
    assert ebn0_to_sigma(0.0, 8 / 9) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        ebn0_to_sigma(1.0, 0.0)


def test_noiseless_limit():
    s = awgn_llr(np.zeros(100, dtype=np.uint8), 1e-6, seed=1)
    assert (s.llr > 1e10).all()


def test_llr_sign_follows_bits():
    bits = np.array([0, 1] * 50, dtype=np.uint8)
    s = awgn_llr(bits, 1e-3, seed=1)
    assert np.array_equal(s.llr < 0, bits.astype(bool))


def test_seed_determinism():
    a = awgn_llr(np.zeros(64, dtype=np.uint8), 0.8, seed=11, index=5)
    b = awgn_llr(np.zeros(64, dtype=np.uint8), 0.8, seed=11, index=5)
    c = awgn_llr(np.zeros(64, dtype=np.uint8), 0.8, seed=11, index=6)
    assert np.array_equal(a.llr, b.llr)
    assert not np.array_equal(a.llr, c.llr)


def test_llr_block_matches_single_frames():
    blk = llr_block(32, 0.9, 4, [3, 7])
    assert np.array_equal(blk[1], awgn_llr(np.zeros(32, dtype=np.uint8), 0.9, 4, 7).llr)


def test_streams_are_distinct():
    a = frame_rng(1, 0, stream=0).random(4)
    b = frame_rng(1, 0, stream=1).random(4)
    assert not np.array_equal(a, b)


def test_llr_mean_monte_carlo():
    # E[2y/sigma^2] = 2/sigma^2 = 2 for sigma = 1; std of the mean is 2/sqrt(1e6)
    llr = llr_block(100_000, 1.0, 0, range(10)).ravel()
    assert abs(llr.mean() - 2.0) < 0.01


def test_llr_sign_statistics():
    sigma = 0.9
    llr = llr_block(50_000, sigma, 2, range(4)).ravel()
    p = norm.sf(1 / sigma)
    se = math.sqrt(p * (1 - p) / llr.size)
    assert abs(np.mean(llr < 0) - p) < 3 * se


def test_gaussianity():
    z = (llr_block(200_000, 1.0, 5, [0])[0] / 2 - 1.0)
    assert abs(z.std() - 1.0) < 0.01
    assert abs(np.mean(z ** 3)) < 0.03


def test_training_batch_even_coverage():
    H = regular_code(24, 3, 6)
    s = training_batch(BatchSpec(6, (1.0, 1.2), [H]), seed=0)
    assert sorted(x.ebn0_db for x in s) == [1.0, 1.0, 1.1, 1.1, 1.2, 1.2]
    assert all(not x.tx_bits.any() for x in s)
    s = training_batch(BatchSpec(3, (1.0, 1.0), [H]), seed=0)
    assert [x.ebn0_db for x in s] == [1.0, 1.0, 1.0]


def test_training_batch_round_robin_codes():
    H1, H2 = regular_code(24, 3, 6), regular_code(30, 3, 6)
    plan = batch_plan(BatchSpec(8, (1.0, 1.1), [H1, H2]))
    assert [c for c, _ in plan] == [0, 1] * 4
    assert [e for c, e in plan if c == 0] == [1.0, 1.1, 1.0, 1.1]
    lens = [x.llr.size for x in training_batch(BatchSpec(4, (1.0, 1.1), [H1, H2]), 0)]
    assert lens == [24, 30, 24, 30]


def test_batch_spec_validation():
    with pytest.raises(ValueError):
        BatchSpec(4, (2.0, 1.0))
    with pytest.raises(ValueError):
        batch_plan(BatchSpec(4, (1.0, 2.0), []))


def test_batches_use_disjoint_frames():
    H = regular_code(24, 3, 6)
    a = training_batch(BatchSpec(4, (1.0, 1.0), [H]), 0, batch_index=0)
    b = training_batch(BatchSpec(4, (1.0, 1.0), [H]), 0, batch_index=1)
    assert {x.index for x in a}.isdisjoint({x.index for x in b})


def test_ebn0_grid():
    assert ebn0_grid(1.0, 1.3).tolist() == [1.0, 1.1, 1.2, 1.3]
