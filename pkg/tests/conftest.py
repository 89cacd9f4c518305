from pathlib import Path

import numpy as np
import pytest

import minerr as me
from minerr.io import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

A_EXAMPLE = np.array([[-1.0, 0.5, 0.0], [1.0, -1.0, 0.8], [0.3, 1.0, -4.0]])
C_EXAMPLE = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
G1 = np.array([[-1.0, 0.0], [0.0, -1.0], [-0.3, -0.3]])
G2 = np.array([[-0.5, -0.5], [-1.0, 0.0], [0.0, 0.2]])
G3 = np.array([[0.0, -0.5], [0.0, 0.0], [0.5, -1.0]])


@pytest.fixture
def scenario_path():
    def path(name):
        return SCENARIOS / "{}.json".format(name)

    return path


@pytest.fixture
def example():
    return load_scenario(SCENARIOS / "paper_example.json")


@pytest.fixture
def zero_disturbance():
    return load_scenario(SCENARIOS / "zero_disturbance.json")


@pytest.fixture
def example_plant():
    beta = me.SignalVector.from_strings(["0", "y2^2 - 0.2*y2^3", "0"], p=2, q=1)
    return me.PlantModel(C_EXAMPLE, A_EXAMPLE, beta)


@pytest.fixture
def example_envelope():
    return me.DisturbanceEnvelope(
        me.SignalVector.from_strings(["2*cos(t)/(1+t)", "4*sin(t)/(1+t)", "-4*cos(t)/(1+t)"], time_only=True),
        me.SignalVector.from_strings(["2/(1+t)", "4/(1+t)", "4/(1+t)"], time_only=True),
        me.SignalVector.from_strings(["-2/(1+t)", "-4/(1+t)", "-4/(1+t)"], time_only=True),
    )


@pytest.fixture
def example_gains():
    return me.GainSet.from_pairs([G1, G2, G3])


def constant_signal(values):
    return me.SignalVector.from_strings([repr(float(v)) for v in values], time_only=True)


@pytest.fixture
def random_scenario():
    """Returns a factory of random scenarios whose gains all make A + L_k C
    Metzler with row sums <= -1, so v = 1 certifies every gain. C selects
    the first p states, A is itself Metzler and Hurwitz, the disturbance is
    constant with constant gaps."""

    def make(rng, phi=3, t_end=5.0, dt=1e-2, zero_start=False, name="random"):
        n = int(rng.integers(2, 5))
        p = int(rng.integers(1, n + 1))
        C = np.eye(n)[:p]

        def metzler_hurwitz():
            M = rng.uniform(0.0, 1.0, size=(n, n))
            np.fill_diagonal(M, -n - rng.uniform(0.0, 1.0, size=n))
            return M

        A = metzler_hurwitz()
        gains = []
        for _ in range(phi):
            M = metzler_hurwitz()
            # A + L C only differs from A in the first p columns.
            gains.append(M[:, :p] - A[:, :p])

        delta = rng.uniform(-1.0, 1.0, size=n)
        gap_upper = rng.uniform(0.0, 1.0, size=n)
        gap_lower = rng.uniform(0.0, 1.0, size=n)
        envelope = me.DisturbanceEnvelope(
            constant_signal(delta), constant_signal(delta + gap_upper), constant_signal(delta - gap_lower)
        )

        beta = me.SignalVector.from_strings(["sin(y{})".format(i % p + 1) for i in range(n)], p=p, q=1)
        plant = me.PlantModel(C, A, beta)

        x0 = rng.uniform(-2.0, 2.0, size=n)
        if zero_start:
            xbar0, xlower0 = x0, x0
        else:
            xbar0 = x0 + rng.uniform(0.0, 2.0, size=n)
            xlower0 = x0 - rng.uniform(0.0, 2.0, size=n)

        return me.Scenario(
            plant=plant,
            envelope=envelope,
            gains=me.GainSet.from_pairs(gains),
            x0=x0,
            xbar0=xbar0,
            xlower0=xlower0,
            sim=me.SimParams(dt=dt, t_end=t_end, record_stride=10),
            name=name,
        )

    return make
