import itertools
import math

import pytest

from opioid_nlp.stats import (
    UndefinedStatistic,
    asd_binary,
    asd_continuous,
    chi_square_test,
    format_p,
    welch_t_test,
)

from oracles import CHI_GRID, T_GRID, chi2_oracle, t_oracle

def test_grid_size():
    assert len(T_GRID) == 50
    assert len(CHI_GRID) == 50


@pytest.mark.parametrize("case", T_GRID)
def test_welch_against_quadrature(case):
    t, df, p = welch_t_test(*case)
    ot, odf, op = t_oracle(*case)
    assert abs(t - float(ot)) <= 1e-9
    assert abs(df - float(odf)) <= 1e-9 * max(1.0, float(odf))
    assert abs(p - float(op)) <= 1e-6


@pytest.mark.parametrize("table", CHI_GRID)
def test_chi_square_against_quadrature(table):
    stat, df, p = chi_square_test(table)
    ostat, odf, op = chi2_oracle(table)
    assert abs(stat - float(ostat)) <= 1e-9
    assert df == odf
    assert abs(p - float(op)) <= 1e-6


def test_asd_binary_examples():
    assert asd_binary(0.93, 0.82) == pytest.approx(33.7, abs=0.05)
    assert asd_binary(0.5, 0.5) == 0
    assert asd_binary(0.618, 0.411) == pytest.approx(42.3, abs=0.05)
    assert asd_binary(0.6, 0.4) == pytest.approx(40.8, abs=0.05)


def test_asd_binary_complement_symmetry():
    for p, q in itertools.product((0.01, 0.2, 0.5, 0.77, 0.99), repeat=2):
        assert asd_binary(p, q) == pytest.approx(asd_binary(1 - p, 1 - q))


def test_asd_undefined():
    with pytest.raises(UndefinedStatistic):
        asd_binary(0.0, 0.0)
    with pytest.raises(UndefinedStatistic):
        asd_binary(1.0, 1.0)
    with pytest.raises(ValueError):
        asd_binary(1.2, 0.5)
    with pytest.raises(UndefinedStatistic):
        asd_continuous(1.0, 0.0, 2.0, 0.0)


def test_asd_continuous_examples():
    assert asd_continuous(53.3, 12.2, 55.4, 16.1) == pytest.approx(14.7, abs=0.05)
    assert asd_continuous(50.9, 49.8, 33.4, 31.3) == pytest.approx(42.1, abs=0.05)
    assert asd_continuous(3.0, 1.0, 3.0, 1.0) == 0


def test_welch_examples_and_symmetry():
    t, df, p = welch_t_test(5.0, 2.0, 10, 5.0, 2.0, 10)
    assert t == 0 and p == pytest.approx(1.0)
    t, df, p = welch_t_test(53.3, 12.2, 6997, 55.4, 16.1, 57331)
    assert t == pytest.approx(-13.08, abs=0.01) and p < 1e-4
    t2, df2, p2 = welch_t_test(55.4, 16.1, 57331, 53.3, 12.2, 6997)
    assert t2 == -t and df2 == pytest.approx(df) and p2 == pytest.approx(p)


def test_pooled_variance_mode():
    t, df, p = welch_t_test(1.0, 1.0, 10, 2.0, 2.0, 20, equal_var=True)
    pooled = (9 * 1 + 19 * 4) / 28
    assert df == 28
    assert t == pytest.approx(-1 / math.sqrt(pooled * (1 / 10 + 1 / 20)))


def test_welch_errors():
    with pytest.raises(ValueError):
        welch_t_test(1, 1, 1, 1, 1, 5)
    with pytest.raises(UndefinedStatistic):
        welch_t_test(1, 0, 5, 2, 0, 5)


def test_chi_square_examples():
    stat, df, p = chi_square_test([[10, 10], [10, 10]])
    assert stat == 0 and p == pytest.approx(1.0)
    stat, df, p = chi_square_test([[20, 10], [10, 20]])
    assert stat == pytest.approx(6.667, abs=1e-3) and df == 1 and p == pytest.approx(0.0098, abs=1e-4)
    a, b, c, d = 20, 10, 10, 20
    n = a + b + c + d
    assert stat == pytest.approx(n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d)))
    doubled, df2, _ = chi_square_test([[40, 20], [20, 40]])
    assert doubled == pytest.approx(2 * stat) and df2 == df


def test_chi_square_monotone_family():
    ps = [chi_square_test([[50 + k, 50 - k], [50 - k, 50 + k]])[2] for k in range(0, 40, 3)]
    assert all(b < a for a, b in zip(ps, ps[1:]))


def test_chi_square_errors():
    with pytest.raises(UndefinedStatistic):
        chi_square_test([[0, 0], [1, 2]])
    with pytest.raises(ValueError):
        chi_square_test([[1, 2]])
    with pytest.raises(ValueError):
        chi_square_test([[1, -2], [3, 4]])


def test_format_p():
    assert format_p(0.00001) == "<0.0001"
    assert format_p(0.012345) == "0.01235"
    assert format_p(None) == "NA"
