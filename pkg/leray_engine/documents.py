"""
Документ -> объект: сборка комплексов, пучков, фильтраций и отображений
из проверенных pydantic-документов
"""

import logging
from typing import Optional, Tuple

from .cell_site import (
    CellComplex,
    CellularSheaf,
    FilteredSpace,
    InvalidSheafError,
    Stalk,
    cochain_complex,
    skeleta_filtration,
)
from .exact_algebra import EngineError, Subgroup, int_matrix
from .filtered_complex import CochainComplex, Filtration, InvalidFiltrationError
from .leray import CellularMap
from .schemas import (
    CellComplexDocument,
    ComplexDocument,
    FiltrationDocument,
    MapDocument,
    SheafDocument,
)

logger = logging.getLogger(__name__)


def _matrix(data, rows: int, cols: int, what: str, **details):
    try:
        return int_matrix(data, rows, cols)
    except ValueError as e:
        raise EngineError(f"{what}: {e}", **details) from e


def build_cell_complex(doc: CellComplexDocument) -> CellComplex:
    if doc.simplices is not None:
        return CellComplex.from_simplices(doc.simplices)
    cells = [(c.id, c.dim) for c in doc.cells]
    incidence = {}
    for c in doc.cells:
        for face in c.faces:
            incidence[(face.id, c.id)] = face.sign
    X = CellComplex(cells, incidence)
    logger.debug(f"🔍 cell complex with {len(X)} cells, dimension {X.max_dim}")
    return X


def build_sheaf(doc: Optional[SheafDocument], X: CellComplex) -> CellularSheaf:
    """Без документа - постоянный пучок Z"""
    if doc is None:
        return CellularSheaf.constant(X)
    stalks = {}
    for cell, s in doc.stalks.items():
        cols = len(s.relations[0]) if s.relations else 0
        relations = _matrix(s.relations, s.gens, cols, f"Relations of the stalk at '{cell}'", cell=cell)
        stalks[cell] = Stalk.presented(s.gens, relations)
    restrictions = {}
    for r in doc.restrictions:
        if r.source not in X or r.target not in X:
            raise InvalidSheafError(f"Restriction {r.source} -> {r.target} mentions an unknown cell",
                                    face=r.source, coface=r.target)
        rows = stalks[r.target].gens if r.target in stalks else 0
        cols = stalks[r.source].gens if r.source in stalks else 0
        restrictions[(r.source, r.target)] = _matrix(
            r.matrix, rows, cols, f"Restriction {r.source} -> {r.target}", face=r.source, coface=r.target
        )
    return CellularSheaf(X, stalks, restrictions)


def build_complex(doc: ComplexDocument) -> CochainComplex:
    mats = [
        _matrix(m, doc.dims[i + 1], doc.dims[i], f"Differential d^{doc.n_min + i}", degree=doc.n_min + i)
        for i, m in enumerate(doc.differentials)
    ]
    return CochainComplex(doc.n_min, tuple(doc.dims), tuple(mats))


def build_filtered_space(doc: FiltrationDocument, X: CellComplex) -> FilteredSpace:
    if doc.levels is None:
        raise InvalidFiltrationError("A space filtration needs 'levels' (cell -> stage)")
    return FilteredSpace.from_levels(X, doc.levels)


def build_filtration(doc: FiltrationDocument, K: CochainComplex) -> Filtration:
    """
    basis_levels или subgroups на явном комплексе

    Для subgroups: F^p при p <= p_min - весь K^n, неуказанный уровень
    повторяет предыдущий.
    """
    if doc.basis_levels is not None:
        levels = {n: doc.basis_levels[i] for i, n in enumerate(K.degrees) if i < len(doc.basis_levels)}
        return Filtration.basis_aligned(K, levels, p_min=doc.p_min, p_max=doc.p_max)
    if doc.subgroups is not None:
        ps = [s.p for s in doc.subgroups]
        p_min = doc.p_min if doc.p_min is not None else 0
        p_max = doc.p_max if doc.p_max is not None else max(ps, default=0)
        given = {(s.p, s.n): s for s in doc.subgroups}
        levels = {}
        for n in K.degrees:
            dim = K.dim(n)
            chain = [Subgroup.full(dim)]
            for p in range(p_min + 1, p_max + 1):
                entry = given.get((p, n))
                if entry is None:
                    chain.append(chain[-1])
                    continue
                cols = len(entry.generators[0]) if entry.generators else 0
                gens = _matrix(entry.generators, dim, cols, f"Generators of F^{p} K^{n}", p=p, n=n)
                chain.append(Subgroup(dim, gens))
            levels[n] = tuple(chain)
        return Filtration(K, p_min, p_max, levels)
    raise InvalidFiltrationError("A complex filtration needs 'basis_levels' or 'subgroups'")


def build_filtered(
    complex_doc,
    filtration_doc: FiltrationDocument,
    sheaf_doc: Optional[SheafDocument] = None,
) -> Tuple[CochainComplex, Filtration]:
    """
    Явный комплекс с фильтрацией или клеточный комплекс (с пучком) со
    скелетной фильтрацией по уровням клеток
    """
    if isinstance(complex_doc, ComplexDocument):
        K = build_complex(complex_doc)
        return K, build_filtration(filtration_doc, K)
    X = build_cell_complex(complex_doc)
    F = build_sheaf(sheaf_doc, X)
    if filtration_doc.levels is not None:
        return skeleta_filtration(build_filtered_space(filtration_doc, X), F)
    K = cochain_complex(X, F)
    return K, build_filtration(filtration_doc, K)


def build_map(doc: MapDocument) -> CellularMap:
    X = build_cell_complex(doc.source)
    Y = build_cell_complex(doc.target)
    return CellularMap(X, Y, doc.assignment)
