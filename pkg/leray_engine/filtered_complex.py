"""
Filtered Complex - спектральная последовательность фильтрованного комплекса

Функционал:
- Ограниченные коцепные комплексы свободных Z-модулей
- Убывающие бирегулярные фильтрации подгруппами (не обязательно базисными)
- Страницы E_r = Z_r / (Z_{r-1}^{p+1} + d Z_{r-1}^{p-r+1}) и дифференциалы d_r
- Сдвинутая фильтрация Dec и проверка сдвига индексов
- Абатмент: H^n, индуцированная фильтрация L^p и Gr^p
- Отображения страниц, длинная точная последовательность пары
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exact_algebra import (
    CoefficientMode,
    EngineError,
    FgAbGroup,
    HomInvariants,
    IntMatrix,
    Subgroup,
    Subquotient,
    compose_in_coordinates,
    hom_invariants,
    homology_at,
    identity,
    induced_map,
    int_matrix,
    is_exact_at,
    is_zero_matrix,
    kernel,
    matmul,
    matrices_equal,
    subquotient,
    zeros,
)
from .schemas import BigradedTable, DifferentialEntry, FiltrationRow, CohomologyRow, VerificationReport

logger = logging.getLogger(__name__)

Bidegree = Tuple[int, int]


class InvalidComplexError(EngineError):
    """d∘d ≠ 0 или несогласованные размеры"""
    pass


class InvalidFiltrationError(EngineError):
    """Фильтрация не убывает, не исчерпывает или не сохраняется d"""
    pass


class NotFilteredError(EngineError):
    """Отображение понижает уровень фильтрации или не коммутирует с d"""
    pass


class ConvergenceError(EngineError):
    """Стабильная страница не совпала с Gr абатмента"""
    pass


# ==================== Complexes ====================

@dataclass(frozen=True, eq=False)
class CochainComplex:
    """
    K^{n_min} -> ... -> K^{n_max}, dims[i] = rank K^{n_min + i}

    differentials[i]: K^{n_min+i} -> K^{n_min+i+1}, матрица dims[i+1] × dims[i].
    labels (необязательно) - метка каждого базисного элемента, например клетка.
    """
    n_min: int
    dims: Tuple[int, ...]
    differentials: Tuple[IntMatrix, ...]
    labels: Optional[Tuple[Tuple[object, ...], ...]] = None

    def __post_init__(self):
        if any(d < 0 for d in self.dims):
            raise InvalidComplexError("Negative module rank", dims=list(self.dims))
        if len(self.differentials) != max(len(self.dims) - 1, 0):
            raise InvalidComplexError(
                f"Expected {max(len(self.dims) - 1, 0)} differentials, got {len(self.differentials)}"
            )
        for i, d in enumerate(self.differentials):
            if d.shape != (self.dims[i + 1], self.dims[i]):
                raise InvalidComplexError(
                    f"Differential in degree {self.n_min + i} has shape {d.shape}, "
                    f"expected {(self.dims[i + 1], self.dims[i])}",
                    degree=self.n_min + i,
                )
        for i in range(len(self.differentials) - 1):
            if not is_zero_matrix(matmul(self.differentials[i + 1], self.differentials[i])):
                raise InvalidComplexError(
                    f"d∘d ≠ 0 at degree {self.n_min + i}", degree=self.n_min + i
                )
        if self.labels is not None:
            if len(self.labels) != len(self.dims) or any(
                len(lab) != dim for lab, dim in zip(self.labels, self.dims)
            ):
                raise InvalidComplexError("Labels do not match module ranks")

    @classmethod
    def from_matrices(cls, n_min: int, dims: Sequence[int], differentials: Sequence) -> "CochainComplex":
        dims = tuple(int(d) for d in dims)
        mats = tuple(
            int_matrix(m, dims[i + 1], dims[i]) if not isinstance(m, np.ndarray) else m
            for i, m in enumerate(differentials)
        )
        return cls(n_min, dims, mats)

    @property
    def n_max(self) -> int:
        return self.n_min + len(self.dims) - 1

    @property
    def degrees(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def is_empty(self) -> bool:
        return sum(self.dims) == 0

    def dim(self, n: int) -> int:
        if self.n_min <= n <= self.n_max:
            return self.dims[n - self.n_min]
        return 0

    def d(self, n: int) -> IntMatrix:
        """d^n: K^n -> K^{n+1} (нулевая матрица вне диапазона)"""
        if self.n_min <= n < self.n_max:
            return self.differentials[n - self.n_min]
        return zeros(self.dim(n + 1), self.dim(n))

    def label(self, n: int, i: int):
        if self.labels is None:
            return i
        return self.labels[n - self.n_min][i]

    def cocycles(self, n: int) -> Subgroup:
        return Subgroup(self.dim(n), kernel(self.d(n)))

    def coboundaries(self, n: int) -> Subgroup:
        return Subgroup(self.dim(n), self.d(n - 1))

    def cohomology(self, n: int) -> Subquotient:
        return subquotient(self.dim(n), self.cocycles(n), self.coboundaries(n))

    def cohomology_groups(self) -> Dict[int, FgAbGroup]:
        return {n: self.cohomology(n).group for n in self.degrees}

    def euler_characteristic(self) -> int:
        return sum((-1) ** n * g.rank for n, g in self.cohomology_groups().items())

    # === sub- and quotient complexes on basis subsets ===

    def _check_stable(self, keep: Dict[int, Sequence[int]]) -> None:
        for n in range(self.n_min, self.n_max):
            inside = set(keep.get(n, ()))
            outside_next = [i for i in range(self.dim(n + 1)) if i not in set(keep.get(n + 1, ()))]
            d = self.d(n)
            for j in inside:
                if any(d[i, j] != 0 for i in outside_next):
                    raise InvalidComplexError(
                        f"Basis subset is not closed under d at degree {n}", degree=n, basis_element=j
                    )

    def subcomplex(self, keep: Dict[int, Sequence[int]]) -> "CochainComplex":
        """Подкомплекс на подмножестве базиса (должен быть d-устойчив)"""
        self._check_stable(keep)
        idx = {n: sorted(keep.get(n, ())) for n in self.degrees}
        return self._restricted(idx)

    def quotient(self, keep: Dict[int, Sequence[int]]) -> "CochainComplex":
        """K / (подкомплекс на keep), на дополнении базиса"""
        self._check_stable(keep)
        idx = {n: [i for i in range(self.dim(n)) if i not in set(keep.get(n, ()))] for n in self.degrees}
        return self._restricted(idx)

    def _restricted(self, idx: Dict[int, List[int]]) -> "CochainComplex":
        dims = tuple(len(idx[n]) for n in self.degrees)
        mats = tuple(
            self.d(n)[np.ix_(idx[n + 1], idx[n])] if idx[n] and idx[n + 1] else zeros(len(idx[n + 1]), len(idx[n]))
            for n in range(self.n_min, self.n_max)
        )
        labels = None
        if self.labels is not None:
            labels = tuple(tuple(self.label(n, i) for i in idx[n]) for n in self.degrees)
        return CochainComplex(self.n_min, dims, mats, labels)


# ==================== Filtrations ====================

@dataclass(frozen=True, eq=False)
class Filtration:
    """
    Убывающая фильтрация F^p K^n, p_min <= p <= p_max

    levels[n][p - p_min] = F^p K^n. F^p = K^n при p <= p_min, F^p = 0 при p > p_max.
    """
    complex: CochainComplex
    p_min: int
    p_max: int
    levels: Dict[int, Tuple[Subgroup, ...]]

    def __post_init__(self):
        K = self.complex
        if self.p_max < self.p_min:
            raise InvalidFiltrationError(f"p_max {self.p_max} < p_min {self.p_min}")
        width = self.p_max - self.p_min + 1
        for n in K.degrees:
            chain = self.levels.get(n)
            if chain is None or len(chain) != width:
                raise InvalidFiltrationError(f"Degree {n} needs {width} filtration levels", degree=n)
            if chain[0] != Subgroup.full(K.dim(n)):
                raise InvalidFiltrationError(f"F^{self.p_min} K^{n} is not all of K^{n}", degree=n)
            for i in range(width - 1):
                if not chain[i].contains_subgroup(chain[i + 1]):
                    raise InvalidFiltrationError(
                        f"F^{self.p_min + i + 1} K^{n} is not contained in F^{self.p_min + i} K^{n}",
                        degree=n, p=self.p_min + i + 1,
                    )
        for n in range(K.n_min, K.n_max):
            for p in range(self.p_min, self.p_max + 1):
                image = self.level(n, p).image(K.d(n))
                if not self.level(n + 1, p).contains_subgroup(image):
                    raise InvalidFiltrationError(
                        f"d does not preserve the filtration: d(F^{p} K^{n}) ⊄ F^{p} K^{n + 1}",
                        degree=n, p=p,
                    )

    def level(self, n: int, p: int) -> Subgroup:
        dim = self.complex.dim(n)
        if not (self.complex.n_min <= n <= self.complex.n_max):
            return Subgroup.zero(dim)
        if p <= self.p_min:
            return Subgroup.full(dim)
        if p > self.p_max:
            return Subgroup.zero(dim)
        return self.levels[n][p - self.p_min]

    @property
    def width(self) -> int:
        return self.p_max - self.p_min

    @classmethod
    def from_levels(cls, K: CochainComplex, p_min: int, levels: Dict[int, Sequence[Subgroup]]) -> "Filtration":
        widths = {len(v) for v in levels.values()} or {1}
        if len(widths) != 1:
            raise InvalidFiltrationError("All degrees must list the same number of levels")
        width = widths.pop()
        return cls(K, p_min, p_min + width - 1, {n: tuple(levels.get(n, ())) for n in K.degrees})

    @classmethod
    def basis_aligned(
        cls,
        K: CochainComplex,
        basis_levels: Dict[int, Sequence[int]],
        p_min: Optional[int] = None,
        p_max: Optional[int] = None,
    ) -> "Filtration":
        """F^p K^n = span{e_i : level(e_i) >= p}"""
        all_levels = [a for n in K.degrees for a in basis_levels.get(n, ())]
        if p_min is None:
            p_min = min(all_levels, default=0)
        if p_max is None:
            p_max = max(all_levels, default=p_min)
        levels = {}
        for n in K.degrees:
            lv = list(basis_levels.get(n, ()))
            if len(lv) != K.dim(n):
                raise InvalidFiltrationError(f"Degree {n} needs {K.dim(n)} basis levels", degree=n)
            if any(a < p_min for a in lv):
                raise InvalidFiltrationError(f"Basis level below p_min={p_min} in degree {n}", degree=n)
            levels[n] = tuple(
                Subgroup(K.dim(n), identity(K.dim(n))[:, [i for i, a in enumerate(lv) if a >= p]])
                for p in range(p_min, p_max + 1)
            )
        return cls(K, p_min, p_max, levels)

    @classmethod
    def trivial(cls, K: CochainComplex) -> "Filtration":
        """G^0 = K, G^1 = 0"""
        return cls(K, 0, 0, {n: (Subgroup.full(K.dim(n)),) for n in K.degrees})

    def induced_on_subcomplex(self, keep: Dict[int, Sequence[int]]) -> "Filtration":
        """F ∩ L для подкомплекса на подмножестве базиса (координаты подкомплекса)"""
        sub = self.complex.subcomplex(keep)
        levels = {}
        for n in self.complex.degrees:
            idx = sorted(keep.get(n, ()))
            dim = self.complex.dim(n)
            span = Subgroup(dim, identity(dim)[:, idx])
            chain = []
            for p in range(self.p_min, self.p_max + 1):
                inter = self.level(n, p).intersect(span)
                chain.append(Subgroup(len(idx), inter.basis[idx, :]))
            levels[n] = tuple(chain)
        return Filtration(sub, self.p_min, self.p_max, levels)


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    complex: CochainComplex
    filtration: Filtration


# ==================== Pages ====================

@dataclass(frozen=True, eq=False)
class Page:
    """
    Страница E_r: подфакторы entries[(p, q)] и дифференциалы бистепени bidegree

    differentials[(p, q)] - матрица d_r: E^{p,q} -> E^{p+dp, q+dq}
    в инвариантных координатах; отсутствует, если цель вне носителя.
    """
    r: int
    bidegree: Bidegree
    entries: Dict[Bidegree, Subquotient]
    differentials: Dict[Bidegree, IntMatrix] = field(default_factory=dict)

    def group(self, p: int, q: int) -> FgAbGroup:
        entry = self.entries.get((p, q))
        return entry.group if entry is not None else FgAbGroup.zero()

    def differential(self, p: int, q: int) -> IntMatrix:
        dp, dq = self.bidegree
        mat = self.differentials.get((p, q))
        if mat is not None:
            return mat
        return zeros(self.group(p + dp, q + dq).ngens, self.group(p, q).ngens)

    def differential_invariants(self, p: int, q: int) -> HomInvariants:
        dp, dq = self.bidegree
        return hom_invariants(self.differential(p, q), self.group(p, q), self.group(p + dp, q + dq))

    def groups(self) -> Dict[Bidegree, FgAbGroup]:
        return {k: v.group for k, v in sorted(self.entries.items()) if not v.group.is_zero()}

    def table(self, mode: CoefficientMode = CoefficientMode.INTEGERS, with_differentials: bool = True) -> BigradedTable:
        table = BigradedTable.from_groups(self.groups())
        if with_differentials:
            for (p, q) in sorted(self.entries):
                inv = self.differential_invariants(p, q)
                if not inv.image.is_zero():
                    table.differentials.append(DifferentialEntry.from_invariants(p, q, inv))
        return table.over(mode)

    def is_zero(self) -> bool:
        return not self.groups()

    def squares_to_zero(self) -> bool:
        dp, dq = self.bidegree
        for (p, q) in self.entries:
            first = self.differential(p, q)
            second = self.differential(p + dp, q + dq)
            composite = compose_in_coordinates(second, first, self.group(p + 2 * dp, q + 2 * dq))
            if not is_zero_matrix(composite):
                return False
        return True


def page_homology(page: Page, p: int, q: int) -> Subquotient:
    """Гомологии (E_r, d_r) в точке (p, q) в инвариантных координатах E_r^{p,q}"""
    dp, dq = page.bidegree
    return homology_at(
        page.differential(p - dp, q - dq),
        page.group(p, q),
        page.differential(p, q),
        page.group(p + dp, q + dq),
    )


class SpectralSequence:
    """
    Спектральная последовательность (K, F) с кэшем страниц

    Z_r^{p,n} = F^p K^n ∩ d^{-1}(F^{p+r} K^{n+1}) кэшируются по обрезанным
    индексам (за пределами [p_min, p_max + 1] фильтрация постоянна).
    """

    def __init__(self, K: CochainComplex, F: Filtration):
        if F.complex is not K:
            raise InvalidFiltrationError("Filtration belongs to a different complex")
        self.complex = K
        self.filtration = F
        self._z_cache: Dict[Tuple[int, int, int], Subgroup] = {}
        self._pages: Dict[int, Page] = {}

    @property
    def r_stab(self) -> int:
        return self.filtration.width + 2

    def _clamp(self, p: int) -> int:
        return min(max(p, self.filtration.p_min), self.filtration.p_max + 1)

    def z(self, r: int, p: int, n: int) -> Subgroup:
        key = (self._clamp(p), self._clamp(p + r), n)
        cached = self._z_cache.get(key)
        if cached is None:
            K, F = self.complex, self.filtration
            cached = F.level(n, p).preimage_within(K.d(n), F.level(n + 1, p + r))
            self._z_cache[key] = cached
        return cached

    def entry(self, r: int, p: int, q: int) -> Subquotient:
        n = p + q
        K = self.complex
        numerator = self.z(r, p, n)
        denominator = self.z(r - 1, p + 1, n) + self.z(r - 1, p - r + 1, n - 1).image(K.d(n - 1))
        return subquotient(K.dim(n), numerator, denominator)

    def support(self) -> Iterator[Bidegree]:
        for p in range(self.filtration.p_min, self.filtration.p_max + 1):
            for n in self.complex.degrees:
                yield p, n - p

    def page(self, r: int) -> Page:
        if r < 0:
            raise ValueError(f"Page index must be >= 0, got {r}")
        cached = self._pages.get(r)
        if cached is not None:
            return cached
        entries = {(p, q): self.entry(r, p, q) for (p, q) in self.support()}
        bidegree = (r, 1 - r)
        differentials = {}
        for (p, q), source in entries.items():
            target = entries.get((p + r, q + 1 - r))
            if target is None or source.group.is_zero() or target.group.is_zero():
                continue
            differentials[(p, q)] = induced_map(self.complex.d(p + q), source, target)
        page = Page(r=r, bidegree=bidegree, entries=entries, differentials=differentials)
        logger.debug(f"🔍 E_{r}: {len(page.groups())} nonzero entries")
        self._pages[r] = page
        return page

    def pages(self, r_max: Optional[int] = None, r_min: int = 1) -> List[Page]:
        r_max = self.r_stab if not r_max else r_max
        return [self.page(r) for r in range(r_min, r_max + 1)]

    def stable_page(self) -> Page:
        return self.page(self.r_stab)

    def abutment(self) -> "Abutment":
        return abutment(self.complex, self.filtration, spectral=self)


def page(K: CochainComplex, F: Filtration, r: int) -> Page:
    """E_r(K, F)"""
    return SpectralSequence(K, F).page(r)


def verify_page_recursion(ss: SpectralSequence, r_max: Optional[int] = None) -> VerificationReport:
    """H(E_r, d_r) ≅ E_{r+1} во всех точках носителя"""
    report = VerificationReport(name="page_recursion")
    r_max = r_max or ss.r_stab
    for r in range(1, r_max):
        current, following = ss.page(r), ss.page(r + 1)
        report.expect("d_r squares to zero", current.squares_to_zero(), r=r)
        for (p, q) in current.entries:
            report.expect_equal(
                "homology of E_r equals E_{r+1}",
                following.group(p, q), page_homology(current, p, q).group,
                r=r, p=p, q=q,
            )
    return report


def euler_characteristic(page: Page) -> int:
    return sum((-1) ** (p + q) * g.rank for (p, q), g in page.groups().items())


def verify_euler_characteristic(ss: SpectralSequence, r_max: Optional[int] = None) -> VerificationReport:
    report = VerificationReport(name="euler_characteristic")
    expected = ss.complex.euler_characteristic()
    for pg in ss.pages(r_max):
        report.expect_equal("alternating rank sum", expected, euler_characteristic(pg), r=pg.r)
    return report


# ==================== Dec ====================

def dec(F: Filtration, K: Optional[CochainComplex] = None) -> Filtration:
    """
    Dec(F)^p K^n = {α ∈ F^{p+n} K^n : dα ∈ F^{p+n+1} K^{n+1}}

    Диапазон p: [p_min - n_max - 1, p_max - n_min]; на нижнем конце уровень равен K^n.
    """
    K = K or F.complex
    if K.is_empty():
        return Filtration.trivial(K)
    p_lo = F.p_min - K.n_max - 1
    p_hi = F.p_max - K.n_min
    levels = {}
    for n in K.degrees:
        levels[n] = tuple(
            F.level(n, p + n).preimage_within(K.d(n), F.level(n + 1, p + n + 1))
            for p in range(p_lo, p_hi + 1)
        )
    return Filtration(K, p_lo, p_hi, levels)


def canonical_filtration(K: CochainComplex) -> Filtration:
    """τ = Dec тривиальной фильтрации"""
    return dec(Filtration.trivial(K), K)


def dec_index(p: int, q: int) -> Bidegree:
    """(p, q) на стороне Dec -> индекс на исходной стороне"""
    return 2 * p + q, -p


def _dec_inverse(a: int, b: int) -> Bidegree:
    return -b, a + 2 * b


def verify_dec_shift(K: CochainComplex, F: Filtration, r_max: int = 0) -> VerificationReport:
    """
    E_r^{p,q}(K, Dec F) ≅ E_{r+1}^{2p+q, -p}(K, F) для r = 1..r_max

    Сравниваются группы и инварианты (образ, ядро, коядро) дифференциалов.
    r_max = 0 означает "до стабилизации обеих сторон".
    """
    report = VerificationReport(name="dec_shift")
    original = SpectralSequence(K, F)
    shifted = SpectralSequence(K, dec(F, K))
    if not r_max:
        r_max = max(original.r_stab, shifted.r_stab)
    for r in range(1, r_max + 1):
        left = shifted.page(r)
        right = original.page(r + 1)
        locations = set(left.groups()) | {_dec_inverse(a, b) for (a, b) in right.groups()}
        for (p, q) in sorted(locations):
            a, b = dec_index(p, q)
            report.expect_equal("entry", right.group(a, b), left.group(p, q), r=r, p=p, q=q)
            report.expect_equal(
                "differential",
                right.differential_invariants(a, b),
                left.differential_invariants(p, q),
                r=r, p=p, q=q,
            )
    if report.passed:
        logger.info(f"✅ Dec shift verified up to r={r_max} ({report.checks} checks)")
    else:
        logger.warning(f"⚠️ Dec shift mismatch: {report.first_mismatch}")
    return report


# ==================== Abutment ====================

@dataclass(frozen=True, eq=False)
class Abutment:
    """
    H^n(K) с индуцированной фильтрацией

    levels[(p, n)] - решётка ker d ∩ F^p + im d в K^n (числитель L^p H^n);
    пригодна для сравнения фильтраций на одной и той же группе коцепей.
    """
    p_min: int
    p_max: int
    cohomology: Dict[int, Subquotient]
    levels: Dict[Tuple[int, int], Subgroup]
    graded: Dict[Tuple[int, int], FgAbGroup]

    def group(self, n: int) -> FgAbGroup:
        entry = self.cohomology.get(n)
        return entry.group if entry is not None else FgAbGroup.zero()

    def level(self, p: int, n: int) -> Subgroup:
        p = min(max(p, self.p_min), self.p_max + 1)
        return self.levels[(p, n)]

    def filtration_group(self, p: int, n: int) -> FgAbGroup:
        sq = self.cohomology.get(n)
        if sq is None:
            return FgAbGroup.zero()
        return subquotient(sq.ambient_rank, self.level(p, n), sq.denominator).group

    def graded_piece(self, p: int, n: int) -> FgAbGroup:
        return self.graded.get((p, n), FgAbGroup.zero())

    def rows(self, mode: CoefficientMode = CoefficientMode.INTEGERS) -> List[CohomologyRow]:
        return [CohomologyRow(degree=n, group=sq.group.over(mode)) for n, sq in sorted(self.cohomology.items())]

    def filtration_rows(self, mode: CoefficientMode = CoefficientMode.INTEGERS) -> List[FiltrationRow]:
        return [
            FiltrationRow(
                p=p, n=n,
                level=self.filtration_group(p, n).over(mode),
                graded=self.graded_piece(p, n).over(mode),
            )
            for (p, n) in sorted(self.graded)
            if not self.graded[(p, n)].is_zero()
        ]


def abutment(
    K: CochainComplex,
    F: Filtration,
    spectral: Optional[SpectralSequence] = None,
    check: bool = True,
) -> Abutment:
    """
    H^n, L^p H^n = im(H^n(F^p K) -> H^n(K)) и Gr^p H^n

    check=False пропускает сверку со стабильной страницей.

    Raises:
        ConvergenceError: E_{r_stab}^{p, n-p} ≇ Gr^p H^n
    """
    ss = spectral or SpectralSequence(K, F)
    cohomology, levels, graded = {}, {}, {}
    for n in K.degrees:
        H = K.cohomology(n)
        cohomology[n] = H
        cocycles = H.numerator
        for p in range(F.p_min, F.p_max + 2):
            levels[(p, n)] = cocycles.intersect(F.level(n, p)) + H.denominator
        for p in range(F.p_min, F.p_max + 1):
            graded[(p, n)] = subquotient(K.dim(n), levels[(p, n)], levels[(p + 1, n)]).group
    result = Abutment(F.p_min, F.p_max, cohomology, levels, graded)
    if not check:
        return result
    stable = ss.stable_page()
    for (p, n), g in graded.items():
        if stable.group(p, n - p) != g:
            logger.error(f"❌ E_∞^{p},{n - p} = {stable.group(p, n - p)} but Gr^{p} H^{n} = {g}")
            raise ConvergenceError(
                "Stable page does not match the graded abutment",
                p=p, n=n, stable=str(stable.group(p, n - p)), graded=str(g),
            )
    return result


# ==================== Maps of pages ====================

def check_filtered_map(
    phi: Dict[int, IntMatrix],
    source: SpectralSequence,
    target: SpectralSequence,
) -> None:
    """
    Raises:
        NotFilteredError: φ не цепное или понижает фильтрацию
    """
    K, L = source.complex, target.complex
    degrees = sorted(set(K.degrees) | set(L.degrees))
    for n in degrees:
        phi_n = phi.get(n, zeros(L.dim(n), K.dim(n)))
        if phi_n.shape != (L.dim(n), K.dim(n)):
            raise NotFilteredError(f"φ^{n} has shape {phi_n.shape}", degree=n)
    for n in degrees:
        phi_n = phi.get(n, zeros(L.dim(n), K.dim(n)))
        phi_next = phi.get(n + 1, zeros(L.dim(n + 1), K.dim(n + 1)))
        if not matrices_equal(matmul(L.d(n), phi_n), matmul(phi_next, K.d(n))):
            raise NotFilteredError(f"φ does not commute with d in degree {n}", degree=n)
        lo = min(source.filtration.p_min, target.filtration.p_min)
        hi = max(source.filtration.p_max, target.filtration.p_max)
        for p in range(lo, hi + 1):
            image = source.filtration.level(n, p).image(phi_n)
            if not target.filtration.level(n, p).contains_subgroup(image):
                raise NotFilteredError(f"φ drops filtration level: φ(F^{p} K^{n}) ⊄ F^{p}", degree=n, p=p)


def map_of_pages(
    phi: Dict[int, IntMatrix],
    source: SpectralSequence,
    target: SpectralSequence,
    r: int,
) -> Dict[Bidegree, IntMatrix]:
    """
    Отображение E_r(K, F) -> E_r(K', F'), индуцированное фильтрованным φ

    Returns:
        (p, q) -> матрица в инвариантных координатах
    """
    check_filtered_map(phi, source, target)
    src, tgt = source.page(r), target.page(r)
    out = {}
    for (p, q) in sorted(set(src.entries) | set(tgt.entries)):
        n = p + q
        if (p, q) not in src.entries or (p, q) not in tgt.entries:
            out[(p, q)] = zeros(tgt.group(p, q).ngens, src.group(p, q).ngens)
            continue
        phi_n = phi.get(n, zeros(target.complex.dim(n), source.complex.dim(n)))
        out[(p, q)] = induced_map(phi_n, src.entries[(p, q)], tgt.entries[(p, q)])
    return out


def page_map_commutes(
    maps: Dict[Bidegree, IntMatrix],
    source: Page,
    target: Page,
) -> bool:
    """d'_r ∘ φ_r = φ_r ∘ d_r во всех точках"""
    dp, dq = source.bidegree
    for (p, q) in source.entries:
        phi_here = maps.get((p, q), zeros(target.group(p, q).ngens, source.group(p, q).ngens))
        phi_there = maps.get(
            (p + dp, q + dq),
            zeros(target.group(p + dp, q + dq).ngens, source.group(p + dp, q + dq).ngens),
        )
        tgt_group = target.group(p + dp, q + dq)
        left = compose_in_coordinates(target.differential(p, q), phi_here, tgt_group)
        right = compose_in_coordinates(phi_there, source.differential(p, q), tgt_group)
        if not matrices_equal(left, right):
            return False
    return True


# ==================== Long exact sequence of a pair ====================

@dataclass(frozen=True, eq=False)
class LongExactSequence:
    """
    ... -> H^n(L) -> H^n(K) -> H^n(K/L) -> H^{n+1}(L) -> ...

    terms[i] / maps[i]: terms[i] -> terms[i+1], names описывают узлы.
    """
    names: List[str]
    terms: List[FgAbGroup]
    maps: List[IntMatrix]

    def exact_nodes(self) -> List[bool]:
        out = []
        for i in range(len(self.terms)):
            incoming = self.maps[i - 1] if i > 0 else zeros(self.terms[0].ngens, 0)
            outgoing = self.maps[i] if i < len(self.maps) else zeros(0, self.terms[i].ngens)
            target = self.terms[i + 1] if i + 1 < len(self.terms) else FgAbGroup.zero()
            out.append(is_exact_at(incoming, self.terms[i], outgoing, target))
        return out

    def is_exact(self) -> bool:
        return all(self.exact_nodes())


def two_step_filtration(K: CochainComplex, sub: Dict[int, Subgroup]) -> Filtration:
    """0 ⊆ F^1 = L ⊆ F^0 = K"""
    return Filtration(K, 0, 1, {n: (Subgroup.full(K.dim(n)), sub.get(n, Subgroup.zero(K.dim(n)))) for n in K.degrees})


def long_exact_sequence(K: CochainComplex, sub: Dict[int, Subgroup]) -> LongExactSequence:
    """
    Длинная точная последовательность пары из данных E_1 двухшаговой фильтрации

    E_1^{1, n-1} = H^n(L), E_1^{0, n} = H^n(K/L), связывающий гомоморфизм = d_1.
    """
    F = two_step_filtration(K, sub)
    ss = SpectralSequence(K, F)
    e1 = ss.page(1)
    names, terms, maps = [], [], []
    for n in K.degrees:
        H_sub = e1.entries[(1, n - 1)]
        H = K.cohomology(n)
        H_rel = e1.entries[(0, n)]
        ident = identity(K.dim(n))
        i_star = induced_map(ident, H_sub, H)
        j_star = induced_map(ident, H, H_rel)
        names += [f"H^{n}(L)", f"H^{n}(K)", f"H^{n}(K/L)"]
        terms += [H_sub.group, H.group, H_rel.group]
        maps += [i_star, j_star]
        if n < K.n_max:
            maps.append(e1.differential(0, n))
    les = LongExactSequence(names, terms, maps)
    logger.debug(f"🔍 long exact sequence with {len(terms)} terms assembled")
    return les


# ==================== Random corpus ====================

def _random_vector(rng: np.random.Generator, n: int, bound: int = 2) -> List[int]:
    return [int(x) for x in rng.integers(-bound, bound + 1, size=n)]


def random_complex(rng: np.random.Generator, max_rank: int = 4, max_degrees: int = 4) -> CochainComplex:
    """Случайный комплекс: строки d^n берутся из левого ядра d^{n-1}"""
    count = int(rng.integers(1, max_degrees + 1))
    dims = [int(rng.integers(0, max_rank + 1)) for _ in range(count)]
    mats: List[IntMatrix] = []
    for i in range(count - 1):
        if i == 0:
            allowed = identity(dims[0])
        else:
            allowed = kernel(mats[-1].T.copy())
        k = allowed.shape[1]
        coeffs = int_matrix([_random_vector(rng, k, 1) for _ in range(dims[i + 1])], dims[i + 1], k)
        mats.append(matmul(coeffs, allowed.T.copy()))
    n_min = int(rng.integers(-1, 2))
    return CochainComplex(n_min, tuple(dims), tuple(mats))


def random_filtration(rng: np.random.Generator, K: CochainComplex, steps: int = 3) -> Filtration:
    """F^p K^n = S^p_n + d(S^p_{n-1}) для вложенных случайных S^p"""
    p_min = 0
    p_max = int(rng.integers(0, steps))
    spans: Dict[int, List[Subgroup]] = {}
    for n in K.degrees:
        dim = K.dim(n)
        chain = [Subgroup.zero(dim)]  # уровень p_max + 1
        for _ in range(p_max, p_min, -1):
            extra = [_random_vector(rng, dim) for _ in range(int(rng.integers(0, 2)))]
            chain.append(chain[-1] + Subgroup.spanned_by(dim, extra))
        chain.append(Subgroup.full(dim))
        spans[n] = list(reversed(chain))[:-1]  # p_min .. p_max
    levels = {}
    for n in K.degrees:
        chain = []
        for i in range(p_max - p_min + 1):
            level = spans[n][i]
            if n - 1 in spans:
                level = level + spans[n - 1][i].image(K.d(n - 1))
            chain.append(level)
        levels[n] = tuple(chain)
    return Filtration(K, p_min, p_max, levels)


def random_filtered_complex(seed: int, max_rank: int = 4, max_degrees: int = 4, steps: int = 3) -> FilteredComplex:
    rng = np.random.default_rng(seed)
    K = random_complex(rng, max_rank, max_degrees)
    return FilteredComplex(K, random_filtration(rng, K, steps))
