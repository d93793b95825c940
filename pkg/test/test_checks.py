import math

import pytest

from nilheat.checks import MODES, REGISTRY, Outcome, _points, check, run_check, run_checks, select_checks
from nilheat.config import RunConfig
from nilheat.errors import TruncationWarning
from nilheat.report import CheckResult, VerificationReport


def test_registry_covers_every_module():
    prefixes = {cid.split(".", 1)[0] for cid in REGISTRY}
    assert prefixes == {"numerics", "hermite", "heisenberg", "nilmanifold", "bergman", "heat_transform"}
    assert all(entry.reference for entry in REGISTRY.values())


def test_duplicate_ids_are_refused():
    with pytest.raises(ValueError):
        check("numerics.parseval", "again")(lambda cfg, rng: Outcome(0.0, 0.0, 1.0))


def test_select_checks_globs():
    assert select_checks() == sorted(REGISTRY)
    hermite = select_checks(["hermite.*"])
    assert hermite and all(cid.startswith("hermite.") for cid in hermite)
    both = select_checks(["hermite.semigroup", "heat_transform.semigroup"])
    assert both == ["heat_transform.semigroup", "hermite.semigroup"]
    assert select_checks(["nothing.*"]) == []


def test_outcome_modes():
    assert set(MODES) == {"abs", "constancy", "at_least"}
    assert Outcome(1.0 + 1e-13, 1.0, 1e-12).passed()
    assert not Outcome(1.1, 1.0, 1e-12).passed()
    assert Outcome(1e-9, "constancy", 1e-8, mode="constancy").passed()
    assert not Outcome(1e-7, "constancy", 1e-8, mode="constancy").passed()
    assert Outcome(1.5, math.sqrt(2), 0.0, mode="at_least").passed()
    assert not Outcome(1.0, math.sqrt(2), 0.0, mode="at_least").passed()
    assert not Outcome(float("nan"), 0.0, 1.0).passed()
    with pytest.raises(ValueError):
        Outcome(0.0, 0.0, 1.0, mode="relative")


def test_run_check_is_reproducible():
    cfg = RunConfig(workers=1)
    first = run_check("numerics.parseval", cfg)
    second = run_check("numerics.parseval", cfg)
    assert first.passed and first.error is None
    assert first.computed == second.computed
    assert first.detail == second.detail
    other = run_check("numerics.parseval", RunConfig(seed=7, workers=1))
    assert other.detail != first.detail


def test_run_checks_selection_and_order():
    results = run_checks(RunConfig(workers=1), ["numerics.*"])
    assert [r.check_id for r in results] == select_checks(["numerics.*"])
    assert all(r.passed for r in results), [(r.check_id, r.computed, r.error) for r in results]


@pytest.mark.slow
def test_full_suite_passes():
    results = run_checks(RunConfig(workers=2))
    failed = [(r.check_id, r.computed, r.error) for r in results if not r.passed]
    assert not failed


CLAIM_REFS = {
    "sec4-eigen", "sec4-semigroup", "eq-mehler", "thm42",
    "sec21-law", "sec4-twisted", "sec4-partial", "sec22-extension",
    "sec21-average", "sec21-twisted-average", "prop36", "lem35", "sec41-symmetry",
    "prop31", "prop34", "lem24",
    "lem43", "cor45", "thm48-coefficients", "prop44", "thm48", "thm48-conditioning",
    "prop46", "sec22-semigroup", "rem38", "sec41-intertwining", "prop46-constant", "thm41",
}


def test_each_claim_ref_is_checked_exactly_once():
    refs = [entry.ref for entry in REGISTRY.values() if entry.ref is not None]
    assert sorted(refs) == sorted(CLAIM_REFS)
    numeric = [cid for cid, entry in REGISTRY.items() if entry.ref is None]
    assert all(cid.startswith("numerics.") for cid in numeric)


def test_duplicate_claim_refs_are_refused():
    with pytest.raises(ValueError):
        check("numerics.other", "again", ref="lem43")(lambda cfg, rng: Outcome(0.0, 0.0, 1.0))
    assert "numerics.other" not in REGISTRY


def test_report_records_carry_the_claim_ref():
    assert run_check("numerics.parseval", RunConfig(workers=1)).ref is None
    keyed = CheckResult("bergman.unitarity", "unitary", 1e-9, "constancy", 1e-6, "constancy", True, 3, ref="lem43")
    report = VerificationReport(RunConfig(), [keyed])
    assert report.to_dict()["checks"][0]["ref"] == "lem43"
    assert "lem43" in report.summary_table()


def test_under_resolved_grid_is_flagged():
    with pytest.warns(TruncationWarning, match="raised to 8"):
        assert _points(RunConfig(grid=8), 0.5) == 8
    assert _points(RunConfig(grid=32), 0.5) == 16


def test_under_resolved_check_fails():
    result = run_check("heat_transform.semigroup", RunConfig(grid=4, workers=1))
    assert not result.passed
    assert any("raised to 8" in w for w in result.warnings)
