import numpy as np
import pytest

from devport import FiniteProbSpace, RandomVariable, center_market, expectation, ingest_csv
from devport.errors import DimensionMismatch, ParseError, RankDeficient, ValidationError
from devport.probspace import matrix_rank


def test_expectation_centered_example():
    space = FiniteProbSpace.uniform(3)
    assert expectation(space, np.array([-1.5, 0.0, 1.5])) == pytest.approx(0.0, abs=1e-15)


def test_expectation_constant():
    space = FiniteProbSpace(np.array([0.1, 0.2, 0.7]))
    assert expectation(space, np.full(3, 4.2)) == pytest.approx(4.2, abs=1e-12)


def test_expectation_hand_sum():
    space = FiniteProbSpace(np.array([0.25, 0.25, 0.5]))
    assert expectation(space, np.array([-1.0, 0.0, 1.0])) == pytest.approx(0.25)


def test_expectation_dimension_mismatch():
    space = FiniteProbSpace.uniform(3)
    with pytest.raises(DimensionMismatch):
        expectation(space, np.array([1.0, 2.0]))


def test_weights_validation():
    with pytest.raises(ValidationError):
        FiniteProbSpace(np.array([0.5, 0.6]))
    with pytest.raises(ValidationError):
        FiniteProbSpace(np.array([0.0, 1.0]))
    with pytest.raises(ValidationError):
        FiniteProbSpace(np.array([-0.1, 1.1]))


def test_uniform_flag():
    assert FiniteProbSpace.uniform(4).is_uniform
    assert not FiniteProbSpace(np.array([0.25, 0.25, 0.5])).is_uniform


def test_random_variable_length_check():
    space = FiniteProbSpace.uniform(3)
    with pytest.raises(DimensionMismatch):
        RandomVariable(np.array([1.0, 2.0]), space)


def test_center_market_already_centered():
    space = FiniteProbSpace.uniform(3)
    raw = np.array([[-1.0, -1.0, 2.0]])
    market = center_market(raw, space, r0=0.0)
    assert np.allclose(market.centered_returns, raw)
    assert market.mu == pytest.approx([0.0])


def test_center_market_centers_rows():
    space = FiniteProbSpace.uniform(4)
    rng = np.random.default_rng(7)
    for _ in range(20):
        raw = rng.normal(size=(3, 4))
        market = center_market(raw, space, r0=0.1)
        means = market.centered_returns @ space.weights
        assert np.max(np.abs(means)) <= 1e-10
        assert np.allclose(market.mu, raw.mean(axis=1) - 0.1)


def test_center_market_constant_row_rank_deficient():
    space = FiniteProbSpace.uniform(3)
    with pytest.raises(RankDeficient):
        center_market(np.array([[2.0, 2.0, 2.0]]), space)


def test_center_market_dependent_rows():
    space = FiniteProbSpace.uniform(3)
    raw = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0]])
    with pytest.raises(RankDeficient):
        center_market(raw, space)


def test_rank_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = rng.integers(1, 5)
        n = rng.integers(1, 6)
        a = rng.normal(size=(m, n))
        assert matrix_rank(a) == np.linalg.matrix_rank(a)
    # Built-in rank deficiency.
    a = rng.normal(size=(2, 4))
    stacked = np.vstack([a, a[0] + a[1]])
    assert matrix_rank(stacked) == 2


def test_ingest_csv_roundtrip(tmp_path):
    path = tmp_path / "scen.csv"
    path.write_text("a1,a2\n-1,0\n0,-1\n1,1\n")
    raw, space = ingest_csv(path)
    assert raw.shape == (2, 3)
    assert space.n_scenarios == 3
    assert space.is_uniform
    assert np.allclose(raw, [[-1, 0, 1], [0, -1, 1]])


def test_ingest_csv_no_header(tmp_path):
    path = tmp_path / "scen.csv"
    path.write_text("1.5,2.5\n0.5,0.25\n")
    raw, space = ingest_csv(path)
    assert raw.shape == (2, 2)
    assert np.allclose(raw[:, 0], [1.5, 2.5])


def test_ingest_csv_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ParseError):
        ingest_csv(path)


def test_ingest_csv_bad_cell_location(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as err:
        ingest_csv(path)
    assert err.value.row == 3
    assert err.value.column == 2


def test_ingest_csv_ragged(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(ParseError):
        ingest_csv(path)
