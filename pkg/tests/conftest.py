"""Shared test helpers.

Monte Carlo tolerance policy: every stochastic check asserts agreement
within 4 standard errors estimated from the same sample; a failing check
is re-run once with 4x the sample size before being declared genuine
(guards against the ~1-in-16k false positive at fixed seeds).
"""

import math

import numpy as np
import pytest


def run_with_resample(check, label=""):
    """check(factor) raises AssertionError on disagreement; factor scales
    the sample size. One 4x retry, then the failure is real."""
    try:
        check(1)
    except AssertionError:
        check(4)


def assert_mean_within(values, expected, n_se=4.0, label=""):
    values = np.asarray(values, dtype=float)
    sem = values.std(ddof=1) / math.sqrt(values.size)
    diff = abs(values.mean() - expected)
    assert diff <= n_se * max(sem, 1e-300), (
        f"{label}: sample mean {values.mean():.8g} vs expected {expected:.8g}, "
        f"|diff| {diff:.3g} > {n_se} x s.e. {sem:.3g} (size {values.size})")


def assert_matrix_within(mean, stderr, expected, n_se=4.0, label=""):
    mean = np.asarray(mean, dtype=float)
    expected = np.asarray(expected, dtype=float)
    stderr = np.maximum(np.asarray(stderr, dtype=float), 1e-300)
    z = np.abs(mean - expected) / stderr
    worst = float(z.max())
    assert worst <= n_se, (
        f"{label}: worst entry off by {worst:.2f} s.e. (> {n_se}); "
        f"entry {np.unravel_index(int(z.argmax()), z.shape)}")


def assert_rate_at_most(successes, trials, cap, slack_se=4.0, label=""):
    """Empirical failure-rate check: rate <= cap + slack_se * binomial s.e."""
    rate = successes / trials
    se = math.sqrt(cap * (1.0 - cap) / trials)
    assert rate <= cap + slack_se * se, (
        f"{label}: rate {rate:.4f} exceeds {cap} + {slack_se} s.e. ({se:.4f})")


@pytest.fixture(scope="session")
def base_seed():
    return 20260817
