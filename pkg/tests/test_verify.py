import numpy as np

from schattenmc.verify import PropertyResult, run_property_suite


def test_all_properties_pass():
    results = run_property_suite(trials=20, seed=1)
    assert len(results) == 9
    for r in results:
        assert isinstance(r, PropertyResult)
        assert r.passed, f"{r.name}: violation {r.max_violation} > {r.tolerance}"
        assert r.trials == 20


def test_deterministic_per_seed():
    a = run_property_suite(trials=10, seed=5)
    b = run_property_suite(trials=10, seed=5)
    assert [(r.name, r.max_violation) for r in a] == [
        (r.name, r.max_violation) for r in b
    ]


def test_tolerance_scale_hook_forces_failure():
    results = run_property_suite(trials=5, seed=2, tolerance_scale=0.0)
    assert any(not r.passed for r in results)


def test_attainment_violations_are_tiny():
    results = {r.name: r for r in run_property_suite(trials=15, seed=3)}
    assert results["fn_attainment"].max_violation < 1e-10
    assert results["bin_attainment"].max_violation < 1e-10
    # inequality slacks should be at floating-point noise level
    assert results["sandwich_fn_sqrt_rank"].max_violation <= 1e-12
    assert results["trace_power_rotation"].max_violation <= 1e-12
