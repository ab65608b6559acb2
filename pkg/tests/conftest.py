"""Shared fixtures: the generated program corpus used by the heavier suites."""

import pytest

from coercion_forge import GenConfig, genWellTyped


@pytest.fixture(scope="session")
def corpus():
    """500 deterministic well-typed programs, seeds 0 through 499."""
    return [genWellTyped(GenConfig(seed=s, maxDepth=8)) for s in range(500)]
