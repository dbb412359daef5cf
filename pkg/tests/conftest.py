"""Shared pytest plumbing.

The acceptance module reports on the randomized property suites, so it runs
after everything else and reads their outcomes from ``PROPERTY_RESULTS``.
"""
import pytest

# property name -> test node id (relative to the tests directory)
PROPERTY_SUITES = {
    "tensor-reduction PSD equivalence": "test_momentmodel.py::test_tensor_reduction_equivalence",
    "canonical form orbit constancy": "test_polyalg.py::test_canonical_orbit_constant_and_idempotent",
    "permutation invariance": "test_hierarchies.py::test_permutation_invariance",
    "diagonal scaling invariance": "test_hierarchies.py::test_diagonal_scaling_invariance",
    "principal submatrix monotonicity": "test_hierarchies.py::test_principal_submatrix_monotone",
    "direct sum subadditivity": "test_hierarchies.py::test_direct_sum_subadditive",
    "baseline dominance": "test_hierarchies.py::test_baseline_dominance",
    "planted SDP optimum recovery": "test_sdpcore.py::test_recovers_planted_optimum",
}

# node id -> {"outcome": str, "max_examples": int}
PROPERTY_RESULTS = {}


def _short_id(nodeid):
    return nodeid.split("tests/", 1)[-1]


def pytest_collection_modifyitems(config, items):
    items.sort(key=lambda it: it.module.__name__.endswith("test_acceptance"))
    wanted = set(PROPERTY_SUITES.values())
    for it in items:
        if _short_id(it.nodeid) in wanted:
            settings = getattr(it.function, "_hypothesis_internal_use_settings", None)
            PROPERTY_RESULTS[_short_id(it.nodeid)] = {
                "outcome": "not run",
                "max_examples": settings.max_examples if settings else 0,
            }


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_logreport(report):
    key = _short_id(report.nodeid)
    if key not in PROPERTY_RESULTS:
        return
    if report.when == "call" or report.outcome != "passed":
        entry = PROPERTY_RESULTS[key]
        if entry["outcome"] in ("not run", "passed"):
            entry["outcome"] = report.outcome
