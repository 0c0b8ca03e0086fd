from coopfb import ipc, validation
from coopfb.channel import SystemParams
from coopfb.validation import CHECKS, check_algorithm1, check_lemma1, run_checks


def test_every_check_passes_on_stock_parameters():
    results = run_checks(SystemParams(), ["all"], 200)
    assert [r.name for r in results] == list(CHECKS)
    assert all(r.passed for r in results), [r.line() for r in results]


def test_fault_is_caught():
    r = check_lemma1(SystemParams(), 500, fault="skip_search")
    assert not r.passed and r.metric > 0


def test_single_start_ascent_is_the_weak_point(monkeypatch):
    # without extra starting points the ascent stalls in a worse corner on some instances
    monkeypatch.setattr(validation, "algorithm1", lambda inputs, **kw: ipc.algorithm1(inputs, multistart=False, **kw))
    assert not check_algorithm1(SystemParams(), 100).passed
    monkeypatch.undo()
    assert check_algorithm1(SystemParams(), 100).passed
