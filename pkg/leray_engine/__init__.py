"""
Leray Engine - точные спектральные последовательности над Z

Модули:
- exact_algebra: SNF, подгруппы, подфакторы, к.п. абелевы группы
- filtered_complex: фильтрованные комплексы, страницы E_r, Dec, абатмент
- exact_couple: точные пары и их производные
- cell_site: клеточные комплексы и клеточные пучки
- leray: высшие прямые образы и сравнение Лере
- cli: пакетный интерфейс (python -m leray_engine)
"""

from .cell_site import CellComplex, CellularSheaf, FilteredSpace, Stalk, cochain_complex, cohomology
from .exact_algebra import CoefficientMode, EngineError, FgAbGroup, Subgroup, cokernel, smith_normal_form
from .exact_couple import ExactCouple, couple_from_filtration, couple_pages, derive
from .filtered_complex import CochainComplex, Filtration, SpectralSequence, abutment, dec, page, verify_dec_shift
from .leray import CellularMap, compare_leray, higher_direct_image, leray_e2, pair_leray, preimage_filtration

__version__ = "1.0.0"

__all__ = [
    "CellComplex",
    "CellularMap",
    "CellularSheaf",
    "CochainComplex",
    "CoefficientMode",
    "EngineError",
    "ExactCouple",
    "FgAbGroup",
    "FilteredSpace",
    "Filtration",
    "SpectralSequence",
    "Stalk",
    "Subgroup",
    "abutment",
    "cochain_complex",
    "cohomology",
    "cokernel",
    "compare_leray",
    "couple_from_filtration",
    "couple_pages",
    "dec",
    "derive",
    "higher_direct_image",
    "leray_e2",
    "page",
    "pair_leray",
    "preimage_filtration",
    "smith_normal_form",
    "verify_dec_shift",
]
