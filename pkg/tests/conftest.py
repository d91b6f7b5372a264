from fractions import Fraction

import pytest

from bruckrate import schedules as sc


@pytest.fixture(scope="session")
def ex1_half_quarter():
    return sc.ex1_pack(Fraction(1, 2), Fraction(1, 4))


@pytest.fixture(scope="session")
def ex2():
    return sc.ex2_pack()


@pytest.fixture(scope="session")
def doubling():
    return sc.doubling_pack()
