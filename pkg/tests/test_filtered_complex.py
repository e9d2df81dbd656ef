"""
Тесты спектральной последовательности фильтрованного комплекса

Запуск:
    pytest tests/test_filtered_complex.py -v

Тест-кейсы:
1. Тривиальная фильтрация: один столбец E_1^{0,q} = H^q
2. Комплекс с ненулевым d_2: E_1 = E_2, d_2 - изоморфизм, E_3 = 0
3. Dec: d = 0, тривиальная фильтрация -> канонический τ, сдвиг индексов
4. Абатмент и ConvergenceError
5. Отображения страниц: тождество, фильтрованный квазиизоморфизм, ошибки
6. Длинная точная последовательность пары
"""

import pytest

from leray_engine.exact_algebra import FgAbGroup, Subgroup, identity, int_matrix, is_isomorphism, matrices_equal
from leray_engine.filtered_complex import (
    CochainComplex,
    ConvergenceError,
    Filtration,
    InvalidComplexError,
    InvalidFiltrationError,
    NotFilteredError,
    SpectralSequence,
    abutment,
    canonical_filtration,
    dec,
    dec_index,
    long_exact_sequence,
    map_of_pages,
    page,
    page_map_commutes,
    verify_dec_shift,
    verify_euler_characteristic,
    verify_page_recursion,
)

Z = FgAbGroup.free(1)


def times_two() -> CochainComplex:
    """Z --2--> Z в степенях 0, 1"""
    return CochainComplex.from_matrices(0, [1, 1], [[[2]]])


# ===========================================
# Construction errors
# ===========================================

class TestConstruction:

    def test_d_squared_nonzero(self):
        with pytest.raises(InvalidComplexError):
            CochainComplex.from_matrices(0, [1, 1, 1], [[[1]], [[1]]])

    def test_differential_shape(self):
        with pytest.raises(InvalidComplexError):
            CochainComplex(0, (1, 2), (int_matrix([[1]]),))

    def test_filtration_not_preserved_by_d(self, d2_filtered):
        K, _ = d2_filtered
        with pytest.raises(InvalidFiltrationError):
            Filtration.basis_aligned(K, {0: [2], 1: [0]}, p_min=0, p_max=2)

    def test_filtration_not_decreasing(self):
        K = times_two()
        levels = {0: (Subgroup.full(1), Subgroup.zero(1), Subgroup.full(1)), 1: (Subgroup.full(1),) * 3}
        with pytest.raises(InvalidFiltrationError):
            Filtration(K, 0, 2, levels)

    def test_cohomology_of_times_two(self):
        K = times_two()
        assert K.cohomology_groups() == {0: FgAbGroup.zero(), 1: FgAbGroup(torsion=(2,))}
        assert K.euler_characteristic() == 0


# ===========================================
# Pages
# ===========================================

class TestPages:

    def test_trivial_filtration_single_column(self):
        K = times_two()
        ss = SpectralSequence(K, Filtration.trivial(K))
        for r in range(1, ss.r_stab + 1):
            pg = ss.page(r)
            assert pg.groups() == {(0, 1): FgAbGroup(torsion=(2,))}
            assert not pg.differentials
        print("✅ trivial filtration collapses to E_1^{0,q} = H^q")

    def test_d2_example(self, d2_filtered):
        K, F = d2_filtered
        ss = SpectralSequence(K, F)
        expected = {(0, 0): Z, (2, -1): Z}
        assert ss.page(1).groups() == expected
        assert ss.page(2).groups() == expected
        assert ss.page(2).bidegree == (2, -1)
        d2 = ss.page(2).differential(0, 0)
        assert is_isomorphism(d2, Z, Z)
        assert ss.page(3).is_zero()
        assert ss.stable_page().is_zero()
        print("✅ d_2 example: E_1 = E_2, d_2 iso, E_3 = 0")

    def test_d2_table_lists_the_differential(self, d2_filtered):
        K, F = d2_filtered
        table = page(K, F, 2).table()
        assert table.get(0, 0) == Z
        assert len(table.differentials) == 1
        entry = table.differentials[0]
        assert (entry.p, entry.q) == (0, 0)
        assert entry.image == Z and entry.kernel.is_zero() and entry.cokernel.is_zero()

    def test_page_recursion_and_euler(self, d2_filtered):
        K, F = d2_filtered
        ss = SpectralSequence(K, F)
        assert verify_page_recursion(ss).passed
        assert verify_euler_characteristic(ss).passed

    def test_two_step_rows(self):
        """Строка p = 0 - H(K/F^1), строка p = 1 - H(F^1)"""
        K = CochainComplex.from_matrices(0, [1, 1], [[[2]]])
        F = Filtration.basis_aligned(K, {0: [0], 1: [1]}, p_min=0, p_max=1)
        e1 = SpectralSequence(K, F).page(1)
        assert e1.group(0, 0) == Z
        assert e1.group(1, 0) == Z
        inv = e1.differential_invariants(0, 0)
        assert inv.cokernel == FgAbGroup(torsion=(2,))
        assert inv.kernel.is_zero()

    def test_negative_page_index(self, d2_filtered):
        K, F = d2_filtered
        with pytest.raises(ValueError):
            SpectralSequence(K, F).page(-1)


# ===========================================
# Dec
# ===========================================

class TestDec:

    def test_zero_differential(self):
        K = CochainComplex.from_matrices(0, [1, 1], [[[0]]])
        F = Filtration.basis_aligned(K, {0: [0], 1: [1]}, p_min=0, p_max=1)
        shifted = dec(F)
        for n in K.degrees:
            for p in range(-3, 3):
                assert shifted.level(n, p) == F.level(n, p + n)

    def test_trivial_filtration_gives_canonical(self):
        K = times_two()
        tau = canonical_filtration(K)
        for n in K.degrees:
            assert tau.level(n, -n - 1) == Subgroup.full(K.dim(n))
            assert tau.level(n, -n) == K.cocycles(n)
            assert tau.level(n, -n + 1).is_zero()

    def test_range(self, d2_filtered):
        K, F = d2_filtered
        shifted = dec(F)
        assert (shifted.p_min, shifted.p_max) == (F.p_min - K.n_max - 1, F.p_max - K.n_min)

    def test_shift_on_d2_example(self, d2_filtered):
        K, F = d2_filtered
        report = verify_dec_shift(K, F)
        assert report.passed, report.first_mismatch
        shifted = SpectralSequence(K, dec(F))
        original = SpectralSequence(K, F)
        for (p, q), g in shifted.page(1).groups().items():
            assert original.page(2).group(*dec_index(p, q)) == g
        print("✅ E_r(Dec F) matches E_{r+1}(F) on the d_2 example")

    def test_shift_on_trivial_filtration(self):
        K = times_two()
        assert verify_dec_shift(K, Filtration.trivial(K)).passed


# ===========================================
# Abutment
# ===========================================

class TestAbutment:

    def test_trivial_filtration(self):
        K = times_two()
        ab = abutment(K, Filtration.trivial(K))
        assert ab.group(1) == FgAbGroup(torsion=(2,))
        assert ab.filtration_group(0, 1) == FgAbGroup(torsion=(2,))
        assert ab.filtration_group(1, 1).is_zero()
        assert ab.graded_piece(0, 1) == FgAbGroup(torsion=(2,))

    def test_d2_example_is_acyclic(self, d2_filtered):
        K, F = d2_filtered
        ab = abutment(K, F)
        assert all(ab.group(n).is_zero() for n in K.degrees)
        assert all(g.is_zero() for g in ab.graded.values())
        assert ab.filtration_rows() == []

    def test_rows(self):
        K = CochainComplex.from_matrices(0, [1], [])
        F = Filtration.basis_aligned(K, {0: [1]}, p_min=0, p_max=1)
        ab = abutment(K, F)
        rows = ab.filtration_rows()
        assert [(row.p, row.n) for row in rows] == [(1, 0)]
        assert rows[0].level == Z and rows[0].graded == Z

    def test_mismatched_stable_page(self):
        K = CochainComplex.from_matrices(0, [1], [])
        F = Filtration.basis_aligned(K, {0: [1]}, p_min=0, p_max=1)
        wrong = SpectralSequence(K, Filtration.trivial(K))
        with pytest.raises(ConvergenceError):
            abutment(K, F, spectral=wrong)
        assert abutment(K, F, spectral=wrong, check=False).graded_piece(1, 0) == Z


# ===========================================
# Maps of pages
# ===========================================

def padded_d2():
    """d_2 пример плюс ацикличное слагаемое c -> e на уровне 0"""
    K = CochainComplex.from_matrices(0, [2, 2], [[[1, 0], [0, 1]]])
    return K, Filtration.basis_aligned(K, {0: [0, 0], 1: [2, 0]}, p_min=0, p_max=2)


class TestMapOfPages:

    def test_identity(self, d2_filtered):
        K, F = d2_filtered
        ss = SpectralSequence(K, F)
        phi = {n: identity(K.dim(n)) for n in K.degrees}
        for r in (1, 2):
            maps = map_of_pages(phi, ss, ss, r)
            for (p, q), mat in maps.items():
                assert matrices_equal(mat, identity(ss.page(r).group(p, q).ngens))

    def test_filtered_quasi_isomorphism(self, d2_filtered):
        K, F = d2_filtered
        L, G = padded_d2()
        phi = {0: int_matrix([[1], [0]]), 1: int_matrix([[1], [0]])}
        source, target = SpectralSequence(K, F), SpectralSequence(L, G)
        for r in range(1, source.r_stab + 1):
            maps = map_of_pages(phi, source, target, r)
            src, tgt = source.page(r), target.page(r)
            assert page_map_commutes(maps, src, tgt)
            for (p, q), mat in maps.items():
                assert is_isomorphism(mat, src.group(p, q), tgt.group(p, q))
        print("✅ filtered quasi-isomorphism is an isomorphism on every page")

    def test_map_dropping_filtration(self, d2_filtered):
        K, F = d2_filtered
        phi = {n: identity(K.dim(n)) for n in K.degrees}
        with pytest.raises(NotFilteredError):
            map_of_pages(phi, SpectralSequence(K, F), SpectralSequence(K, Filtration.trivial(K)), 1)

    def test_not_a_chain_map(self, d2_filtered):
        K, F = d2_filtered
        ss = SpectralSequence(K, F)
        with pytest.raises(NotFilteredError):
            map_of_pages({0: int_matrix([[2]]), 1: int_matrix([[1]])}, ss, ss, 1)


# ===========================================
# Long exact sequence
# ===========================================

class TestLongExactSequence:

    def test_pair_sequence_is_exact(self):
        K = CochainComplex.from_matrices(0, [2, 1], [[[1, 1]]])
        sub = {0: Subgroup.spanned_by(2, [[1, -1]]), 1: Subgroup.zero(1)}
        les = long_exact_sequence(K, sub)
        assert les.is_exact()
        assert les.names[:3] == ["H^0(L)", "H^0(K)", "H^0(K/L)"]
        assert les.terms[0] == Z
        assert les.terms[1] == Z
        print("✅ long exact sequence of a pair")

    def test_torsion_sequence(self):
        K = times_two()
        sub = {0: Subgroup.zero(1), 1: Subgroup.full(1)}
        les = long_exact_sequence(K, sub)
        assert les.is_exact()
        assert les.terms[les.names.index("H^1(K)")] == FgAbGroup(torsion=(2,))
