import numpy as np
import pytest

from rdb_regions.info import (
    FinitePmf,
    JointDist,
    Kernel,
    Stage,
    ValidationError,
    binary_entropy,
    chain_compose,
    condition,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    marginalize,
    mutual_information,
)


def test_entropy_examples():
    assert entropy(FinitePmf.uniform(2)) == pytest.approx(1.0, abs=1e-15)
    assert entropy(FinitePmf.point_mass(3, 1)) == 0.0
    assert entropy([0.9, 0.1]) == pytest.approx(0.468996, abs=1e-6)
    assert entropy(FinitePmf.uniform(8)) == pytest.approx(3.0)


def test_invalid_pmfs_rejected():
    for bad in ([0.5, 0.4], [1.2, -0.2], [np.nan, 1.0], []):
        with pytest.raises(ValidationError):
            FinitePmf(bad)


def test_pmf_is_read_only():
    p = FinitePmf([0.25, 0.75])
    with pytest.raises(ValueError):
        p.probs[0] = 0.5


def test_kernel_validation_and_helpers():
    with pytest.raises(ValidationError):
        Kernel([[0.5, 0.6], [1.0, 0.0]])
    k = Kernel.from_function([1, 0, 1], 2)
    assert k.matrix.tolist() == [[0, 1], [1, 0], [0, 1]]
    assert Kernel.constant(3, [0.2, 0.8]).rows == 3
    assert Kernel.bsc(0.1).row(0).probs.tolist() == [0.9, 0.1]


def test_mutual_information_examples():
    prod = JointDist.product(FinitePmf([0.3, 0.7]), FinitePmf([0.6, 0.4]), names=("A", "B"))
    assert mutual_information(prod, ["A"], ["B"]) == pytest.approx(0.0, abs=1e-12)
    same = JointDist(np.diag([0.5, 0.5]), ("X", "Y"))
    assert mutual_information(same, ["X"], ["Y"]) == pytest.approx(1.0)
    e = 0.11
    dsbs = JointDist(0.5 * np.array([[1 - e, e], [e, 1 - e]]), ("X", "Y"))
    assert mutual_information(dsbs, ["X"], ["Y"]) == pytest.approx(1 - binary_entropy(e), abs=1e-12)
    assert mutual_information(dsbs, ["X"], ["Y"]) == pytest.approx(0.500084, abs=1e-6)


def test_overlapping_axes_rejected():
    j = JointDist(np.full((2, 2), 0.25), ("A", "B"))
    with pytest.raises(ValidationError):
        mutual_information(j, ["A"], ["A", "B"])
    with pytest.raises(ValidationError):
        conditional_mutual_information(j, ["A"], ["B"], ["B"])


def test_conditional_mi_examples():
    j = chain_compose([("C", FinitePmf([0.5, 0.5])), ("A", Kernel.bsc(0.2), ("C",)), ("B", Kernel.bsc(0.3), ("C",))])
    assert conditional_mutual_information(j, ["A"], ["B"], ["C"]) == pytest.approx(0.0, abs=1e-12)
    ind = JointDist.product(FinitePmf([0.2, 0.8]), FinitePmf([0.5, 0.5]), FinitePmf([0.1, 0.9]), names=("A", "B", "C"))
    assert conditional_mutual_information(ind, ["A"], ["B", "C"]) == pytest.approx(0.0, abs=1e-12)
    k = chain_compose([("A", FinitePmf([0.3, 0.7])), ("B", Kernel.bsc(0.1), ("A",)), ("C", FinitePmf.point_mass(2))])
    assert conditional_mutual_information(k, ["A"], ["B"], ["C"]) == pytest.approx(mutual_information(k, ["A"], ["B"]))


def test_chain_compose_identity_and_markov():
    p = FinitePmf([0.2, 0.3, 0.5])
    j = chain_compose([Stage("S", p), Stage("S2", Kernel.identity(3), ("S",))])
    assert np.allclose(j.mass, np.diag(p.probs))
    j = chain_compose([("S", FinitePmf([0.4, 0.6])), ("T", Kernel.bsc(0.2), ("S",)), ("V", Kernel.bsc(0.3), ("T",))])
    assert conditional_mutual_information(j, ["S"], ["V"], ["T"]) == pytest.approx(0.0, abs=1e-12)
    bc = chain_compose([("X", FinitePmf([0.5, 0.5])), ("Y", Kernel.bsc(0.1), ("X",)), ("Z", Kernel.bsc(0.2), ("Y",))])
    assert conditional_mutual_information(bc, ["X"], ["Z"], ["Y"]) == pytest.approx(0.0, abs=1e-12)


def test_chain_compose_multi_parent_order():
    rng = np.random.default_rng(3)
    k = rng.dirichlet(np.ones(2), size=6)  # rows enumerate (B, A) with A fastest
    j = chain_compose([("A", FinitePmf([0.5, 0.5])), ("B", FinitePmf([0.2, 0.3, 0.5])), ("C", Kernel(k), ("B", "A"))])
    got = condition(j, ["C"], ["B", "A"]).matrix
    assert np.allclose(got, k)


def test_chain_compose_errors():
    with pytest.raises(ValidationError):
        chain_compose([("A", FinitePmf([0.5, 0.5])), ("B", Kernel.bsc(0.1), ("Q",))])
    with pytest.raises(ValidationError):
        chain_compose([("A", FinitePmf([0.5, 0.5])), ("B", Kernel(np.eye(3)), ("A",))])


def test_marginalize_and_round_trip():
    j = chain_compose([("S", FinitePmf([0.1, 0.9])), ("T", Kernel([[0.3, 0.7], [0.6, 0.4]]), ("S",))])
    assert np.array_equal(marginalize(j, ["S", "T"]).mass, j.mass)
    assert np.allclose(marginalize(j, ["S"]).mass, [0.1, 0.9], atol=1e-12)
    assert np.allclose(condition(j, ["T"], ["S"]).matrix, [[0.3, 0.7], [0.6, 0.4]], atol=1e-12)
    assert marginalize(j, ["T", "S"]).mass.T.tolist() == j.mass.tolist()


def test_condition_flags_zero_rows():
    j = JointDist(np.array([[0.5, 0.5], [0.0, 0.0]]), ("S", "T"))
    k = condition(j, ["T"], ["S"])
    assert k.undefined_rows == frozenset({1})
    assert np.isnan(k.matrix[1]).all()
    with pytest.raises(ValidationError):
        k.row(1)


def test_condition_dsbs_symmetric():
    e = 0.2
    j = JointDist(0.5 * np.array([[1 - e, e], [e, 1 - e]]), ("S", "T"))
    assert np.allclose(condition(j, ["T"], ["S"]).matrix, [[1 - e, e], [e, 1 - e]])


def test_conditional_entropy():
    j = JointDist(np.diag([0.5, 0.5]), ("A", "B"))
    assert conditional_entropy(j, ["A"], ["B"]) == pytest.approx(0.0, abs=1e-12)
    assert conditional_entropy(j, ["A"]) == pytest.approx(1.0)
