"""
Свойства на случайных корпусах (детерминированные зерна)

Запуск:
    pytest tests/test_properties.py -v
    pytest tests/test_properties.py -v -m "not slow"   # только быстрые

Тест-кейсы:
1. 200 фильтрованных комплексов: рекурсия страниц, χ, Dec, точные пары, E_∞ = Gr
2. 50 длинных точных последовательностей пар
3. VerificationRunner: порядок результатов, ошибка проверки -> FAIL-отчёт
"""

import pytest

from leray_engine.config import DEFAULT_SEED
from leray_engine.exact_algebra import EngineError
from leray_engine.filtered_complex import random_filtered_complex
from leray_engine.schemas import VerificationReport
from leray_engine.verification import (
    VerificationRunner,
    check_filtered_complex,
    check_long_exact_sequence,
    corpus_jobs,
    les_jobs,
)


def failures(reports):
    return [(r.name, r.first_mismatch) for r in reports if not r.passed]


# ===========================================
# Seeded corpora
# ===========================================

@pytest.mark.slow
def test_random_filtered_complexes():
    reports = VerificationRunner(max_workers=4).run_sync(corpus_jobs(DEFAULT_SEED, 200))
    assert len(reports) == 200
    assert not failures(reports), failures(reports)[:3]
    print(f"✅ 200 random filtered complexes ({sum(r.checks for r in reports)} checks)")


@pytest.mark.slow
def test_random_long_exact_sequences():
    reports = VerificationRunner(max_workers=4).run_sync(les_jobs(DEFAULT_SEED, 50))
    assert not failures(reports), failures(reports)[:3]


def test_single_seeds():
    assert check_filtered_complex(DEFAULT_SEED).passed
    assert check_long_exact_sequence(DEFAULT_SEED).passed


def test_generator_is_deterministic():
    first, second = random_filtered_complex(7), random_filtered_complex(7)
    assert first.complex.dims == second.complex.dims
    for n in first.complex.degrees:
        for p in range(first.filtration.p_min, first.filtration.p_max + 1):
            assert first.filtration.level(n, p) == second.filtration.level(n, p)


# ===========================================
# Runner
# ===========================================

async def test_runner_keeps_order_and_reports_errors():
    def ok(name):
        def check():
            report = VerificationReport(name=name)
            report.expect("trivial", True)
            return report
        return check

    def broken():
        raise EngineError("synthetic failure", seed=3)

    jobs = [("a", ok("a")), ("b", broken), ("c", ok("c"))]
    reports = await VerificationRunner(max_workers=2).run(jobs)
    assert [r.name for r in reports] == ["a", "b", "c"]
    assert reports[0].passed and reports[2].passed
    assert not reports[1].passed
    assert "synthetic failure" in reports[1].first_mismatch.actual


def test_runner_uses_settings(monkeypatch):
    monkeypatch.setenv("LERAY_MAX_WORKERS", "3")
    assert VerificationRunner().max_workers == 3
