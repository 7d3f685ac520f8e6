from bcred.checks import (REGISTRY, SCOPES, format_report, report_failed,
                          run_checks, select_checks)


def test_every_scope_has_checks():
    for scope in SCOPES:
        assert select_checks(scope)


def test_default_scope_all_pass():
    results = run_checks()
    assert results and all(r.status == "pass" for r in results), format_report(results)
    assert not report_failed(results)
    assert all(r.margin >= 0 for r in results)


def test_fixture_only_when_requested():
    names = [c.name for c in select_checks("denoisers")]
    assert not any("expanding" in n for n in names)
    res = run_checks("denoisers", include_fixtures=True)
    assert [r.status for r in res].count("xfail") == 1
    assert not report_failed(res)


def test_empty_scope():
    assert run_checks("") == []
    assert format_report([]) == "no checks selected\n"


def test_registry_names_unique():
    names = [c.name for c in REGISTRY]
    assert len(names) == len(set(names))
