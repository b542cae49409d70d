import math

import numpy as np
import pytest

from sotdd.errors import InvalidDimension, InvalidRate
from sotdd.sampling import (
    TIED_TO_THETA,
    MomentOrderLaw,
    SeedSchedule,
    sample_projection_params,
    sample_unit_sphere,
    sample_ztpoisson,
)


def test_zero_sphere_is_sign():
    stream = SeedSchedule(1).stream(0)
    values = {float(sample_unit_sphere(1, stream)[0]) for _ in range(50)}
    assert values == {-1.0, 1.0}


@pytest.mark.parametrize("dim", [1, 2, 3, 10, 257])
def test_unit_norm(dim):
    stream = SeedSchedule(5).stream(dim)
    for _ in range(20):
        assert abs(np.linalg.norm(sample_unit_sphere(dim, stream)) - 1.0) <= 1e-12


def test_invalid_dimension():
    with pytest.raises(InvalidDimension):
        sample_unit_sphere(0, SeedSchedule(0).stream(0))


def test_sphere_coordinate_means_and_sign_symmetry():
    stream = SeedSchedule(11).stream(0)
    draws = np.array([sample_unit_sphere(3, stream) for _ in range(100_000)])
    # CLT bound: coordinate variance on S^2 is 1/3
    bound = 3 * (1 / math.sqrt(3)) / math.sqrt(100_000)
    assert np.all(np.abs(draws.mean(axis=0)) < bound)
    assert abs((draws[:, 0] > 0).mean() - 0.5) < 0.01


def test_ztpoisson_scalar_positive():
    stream = SeedSchedule(2).stream(0)
    assert all(sample_ztpoisson(0.3, stream) >= 1 for _ in range(2000))


def test_ztpoisson_rate_one_pmf_and_mean():
    draws = sample_ztpoisson(1.0, SeedSchedule(3).stream(0), size=1_000_000)
    # pmf(1) = r / (e^r - 1), mean = r / (1 - e^-r) at r = 1
    assert abs((draws == 1).mean() - 1 / (math.e - 1)) < 0.002
    assert abs(draws.mean() - 1 / (1 - math.exp(-1))) < 0.005


@pytest.mark.parametrize("rate", [0.5, 1.0, 5.0])
def test_ztpoisson_never_zero(rate):
    draws = sample_ztpoisson(rate, SeedSchedule(4).stream(int(rate * 10)), size=1_000_000)
    assert draws.min() >= 1


def test_ztpoisson_pmf_matches_closed_form():
    rate = 2.5
    draws = sample_ztpoisson(rate, SeedSchedule(9).stream(0), size=400_000)
    for k in range(1, 7):
        pmf = rate**k / ((math.exp(rate) - 1) * math.factorial(k))
        assert abs((draws == k).mean() - pmf) < 4 * math.sqrt(pmf * (1 - pmf) / draws.size) + 1e-4


@pytest.mark.parametrize("rate", [0.0, -1.0, float("nan")])
def test_ztpoisson_invalid_rate(rate):
    with pytest.raises(InvalidRate):
        sample_ztpoisson(rate, SeedSchedule(0).stream(0))


def test_default_params_shape():
    law = MomentOrderLaw.poisson([1, 2, 3, 4, 5])
    params = sample_projection_params(7, 5, law, True, SeedSchedule(0).stream(3))
    assert len(params.lambdas) == 5 and all(isinstance(v, int) and v >= 1 for v in params.lambdas)
    assert params.psi.shape == (6,)
    assert abs(np.linalg.norm(params.psi) - 1) <= 1e-12
    assert abs(np.linalg.norm(params.theta) - 1) <= 1e-12
    assert params.phi == TIED_TO_THETA and params.tied


def test_tied_consumes_one_sphere_draw():
    law = MomentOrderLaw.uniform(3)
    seen = []

    def sampler(stream):
        seen.append(1)
        return sample_unit_sphere(4, stream)

    sample_projection_params(4, 2, law, True, SeedSchedule(0).stream(0), sampler)
    assert len(seen) == 1
    untied = sample_projection_params(4, 2, law, False, SeedSchedule(0).stream(0), sampler)
    assert len(seen) == 3
    assert abs(np.linalg.norm(untied.phi) - 1) <= 1e-12


def test_uniform_law_frequencies():
    law = MomentOrderLaw.uniform(3)
    stream = SeedSchedule(8).stream(0)
    draws = np.array([law.draw(1, stream)[0] for _ in range(1_000_000)])
    for value in (1, 2, 3):
        assert abs((draws == value).mean() - 1 / 3) < 0.002


def test_streams_deterministic_and_distinct():
    law = MomentOrderLaw.poisson([1, 2])
    a = sample_projection_params(5, 2, law, False, SeedSchedule(42).stream(7))
    b = sample_projection_params(5, 2, law, False, SeedSchedule(42).stream(7))
    c = sample_projection_params(5, 2, law, False, SeedSchedule(42).stream(8))
    for x, y in ((a.psi, b.psi), (a.theta, b.theta), (a.phi, b.phi)):
        assert x.tobytes() == y.tobytes()
    assert a.lambdas == b.lambdas
    assert a.theta.tobytes() != c.theta.tobytes()


def test_law_parse_round_trip():
    for text in ("poisson:1.0,2.0,3.5", "uniform:4"):
        assert MomentOrderLaw.parse(text).spec() == text
    with pytest.raises(ValueError):
        MomentOrderLaw.parse("gamma:2")
    with pytest.raises(InvalidRate):
        MomentOrderLaw.poisson([1, 0])


def test_poisson_law_rate_count_must_match_k():
    with pytest.raises(ValueError):
        MomentOrderLaw.poisson([1, 2]).draw(3, SeedSchedule(0).stream(0))
