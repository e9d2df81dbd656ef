"""
Verification Runner - параллельный прогон независимых проверок

Каждая проверка - функция без аргументов, возвращающая VerificationReport.
Проверки выполняются в потоках (asyncio.to_thread), не более max_workers
одновременно; результаты возвращаются в порядке входа.
"""

import asyncio
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import get_settings
from .exact_algebra import EngineError, Subgroup
from .exact_couple import verify_couple_against_filtration
from .filtered_complex import (
    SpectralSequence,
    abutment,
    long_exact_sequence,
    random_complex,
    random_filtered_complex,
    verify_dec_shift,
    verify_euler_characteristic,
    verify_page_recursion,
)
from .schemas import VerificationReport

logger = logging.getLogger(__name__)

Job = Tuple[str, Callable[[], VerificationReport]]


class VerificationRunner:
    """Запуск проверок с ограничением параллелизма"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or get_settings().max_workers

    async def _run_one(self, semaphore: asyncio.Semaphore, name: str, check: Callable[[], VerificationReport]) -> VerificationReport:
        async with semaphore:
            try:
                report = await asyncio.to_thread(check)
            except EngineError as e:
                logger.error(f"❌ {name}: {e}")
                report = VerificationReport(name=name)
                report.expect("completed without error", False, expected="report", actual=f"{type(e).__name__}: {e}")
            return report

    async def run(self, jobs: Sequence[Job]) -> List[VerificationReport]:
        semaphore = asyncio.Semaphore(self.max_workers)
        reports = await asyncio.gather(*(self._run_one(semaphore, name, check) for name, check in jobs))
        failed = [r.name for r in reports if not r.passed]
        if failed:
            logger.warning(f"⚠️ {len(failed)} of {len(reports)} verifications failed: {failed[:5]}")
        else:
            logger.info(f"✅ {len(reports)} verifications passed")
        return list(reports)

    def run_sync(self, jobs: Sequence[Job]) -> List[VerificationReport]:
        return asyncio.run(self.run(jobs))


# ==================== Seeded corpora ====================

def check_filtered_complex(seed: int) -> VerificationReport:
    """Рекурсия страниц, эйлерова характеристика, сдвиг Dec, пара, абатмент"""
    fc = random_filtered_complex(seed)
    ss = SpectralSequence(fc.complex, fc.filtration)
    report = VerificationReport(name=f"random filtered complex #{seed}")
    report.merge(verify_page_recursion(ss), "page recursion: ")
    report.merge(verify_euler_characteristic(ss), "euler: ")
    report.merge(verify_dec_shift(fc.complex, fc.filtration), "dec: ")
    report.merge(verify_couple_against_filtration(fc.complex, fc.filtration), "couple: ")
    stable = ss.stable_page()
    abut = abutment(fc.complex, fc.filtration, spectral=ss, check=False)
    for (p, n), g in abut.graded.items():
        report.expect_equal("E_infinity equals graded abutment", g, stable.group(p, n - p), p=p, n=n)
    return report


def check_long_exact_sequence(seed: int) -> VerificationReport:
    """Случайный подкомплекс L ⊆ K (d-устойчивые подгруппы) и точность LES пары"""
    rng = np.random.default_rng(seed)
    K = random_complex(rng)
    sub = {}
    for n in K.degrees:
        gens = [[int(x) for x in rng.integers(-2, 3, size=K.dim(n))] for _ in range(int(rng.integers(0, 3)))]
        sub[n] = Subgroup.spanned_by(K.dim(n), gens)
    for n in K.degrees:
        if n + 1 in sub:
            sub[n + 1] = sub[n + 1] + sub[n].image(K.d(n))
    les = long_exact_sequence(K, sub)
    report = VerificationReport(name=f"long exact sequence #{seed}")
    for i, ok in enumerate(les.exact_nodes()):
        report.expect("exact at node", ok, node=i)
    return report


def corpus_jobs(seed: int, size: int) -> List[Job]:
    return [(f"random filtered complex #{s}", lambda s=s: check_filtered_complex(s)) for s in range(seed, seed + size)]


def les_jobs(seed: int, size: int) -> List[Job]:
    return [(f"long exact sequence #{s}", lambda s=s: check_long_exact_sequence(s)) for s in range(seed, seed + size)]
