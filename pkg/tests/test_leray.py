"""
Тесты последовательности Лере клеточного отображения

Запуск:
    pytest tests/test_leray.py -v

Тест-кейсы:
1. Проверка CellularMap (порядок, размерность, полнота)
2. R^q f_*: бутылка Клейна (скрученный R^1), тор, постоянное отображение
3. compare_leray: E_2 = H^p(Y, R^q f_*), вырождение, абатмент
4. Независимость от клеточной фильтрации базы, S-функториальность
5. Пары: лист Мёбиуса и цилиндр относительно слоя
"""

import pytest

from leray_engine import fixtures as models
from leray_engine.cell_site import (
    CellComplex,
    CellularSheaf,
    InvalidSheafError,
    NotCellularError,
    NotClosedError,
    Stalk,
    cohomology,
    dimension_skeleta,
    one_step,
)
from leray_engine.exact_algebra import CoefficientMode, FgAbGroup, Subgroup, int_matrix
from leray_engine.leray import (
    CellularMap,
    EdgeMap,
    InvalidCellularMapError,
    NotMemberError,
    compare_leray,
    edge_map,
    filtration_side,
    higher_direct_image,
    higher_direct_images,
    leray_e2,
    pair_leray,
    preimage_filtration,
    pushforward_filtration,
    verify_filtration_independence,
    verify_s_functoriality,
)

Z = FgAbGroup.free(1)
Z2 = FgAbGroup(torsion=(2,))
ZERO = FgAbGroup.zero()


# ===========================================
# Cellular maps
# ===========================================

class TestCellularMap:

    def test_identity_and_constant(self):
        X = models.circle()
        assert CellularMap.identity(X)("e1") == "e1"
        point = CellComplex.point()
        f = CellularMap.constant(X, point, "pt")
        assert f.preimage_star("pt") == frozenset(X.cells)

    def test_missing_image(self):
        I = models.interval()
        with pytest.raises(InvalidCellularMapError):
            CellularMap(I, I, {"w0": "w0", "w1": "w1"})

    def test_unknown_image_and_extra_cells(self):
        I = models.interval()
        with pytest.raises(InvalidCellularMapError):
            CellularMap(I, I, {"w0": "w0", "w1": "w1", "f": "zzz"})
        with pytest.raises(InvalidCellularMapError):
            CellularMap(I, I, {"w0": "w0", "w1": "w1", "f": "f", "extra": "f"})

    def test_dimension_must_not_increase(self):
        I = models.interval()
        with pytest.raises(InvalidCellularMapError):
            CellularMap(I, I, {"w0": "f", "w1": "w1", "f": "f"})

    def test_order_preserving(self):
        I = models.interval()
        with pytest.raises(InvalidCellularMapError) as exc_info:
            CellularMap(I, I, {"w0": "w0", "w1": "w0", "f": "w1"})
        assert exc_info.value.details["coface"] == "f"

    def test_bundle_projection(self, klein):
        f, _ = klein
        assert f("v0*f1") == "v0"
        assert f("e1*w0") == "e1"
        assert f.preimage_star("v0") == frozenset(
            c for c in f.X.cells if c.split("*")[0] in ("v0", "e0", "e1")
        )

    def test_preimage_filtration(self, klein):
        f, _ = klein
        X_filt = preimage_filtration(f, dimension_skeleta(f.Y))
        assert X_filt.levels["v1*f0"] == 0
        assert X_filt.levels["e0*w1"] == 1
        assert X_filt.top == 1


# ===========================================
# Higher direct images
# ===========================================

class TestHigherDirectImages:

    def test_klein_bottle_images(self, klein):
        f, F = klein
        R0, R1 = higher_direct_image(f, F, 0), higher_direct_image(f, F, 1)
        assert all(R0.group(y) == Z for y in f.Y.cells)
        assert all(R1.group(y) == Z for y in f.Y.cells)
        assert cohomology(f.Y, R0) == {0: Z, 1: Z}
        assert cohomology(f.Y, R1) == {0: ZERO, 1: Z2}
        assert higher_direct_image(f, F, 2).is_zero()
        print("✅ R^1 f_* of the Klein bottle is the twisted local system")

    def test_torus_images_are_constant(self, torus):
        f, F = torus
        images = higher_direct_images(f, F)
        assert sorted(images) == [0, 1, 2]
        assert cohomology(f.Y, images[1]) == {0: Z, 1: Z}

    def test_constant_map_recovers_cohomology(self):
        X = models.rp2()
        point = CellComplex.point()
        f = CellularMap.constant(X, point, "pt")
        table = leray_e2(f, CellularSheaf.constant(X))
        assert table.as_dict() == {(0, 0): Z, (0, 2): Z2}

    def test_identity_map(self):
        X = models.circle()
        F = models.twisted_circle_sheaf(X)
        f = CellularMap.identity(X)
        assert leray_e2(f, F).as_dict() == {(1, 0): Z2}
        assert higher_direct_image(f, F, 1).is_zero()


# ===========================================
# Comparison with the filtration side
# ===========================================

class TestCompareLeray:

    def test_klein_bottle(self, klein):
        f, F = klein
        report = compare_leray(f, F, dimension_skeleta(f.Y))
        assert report.passed, report.first_mismatch
        expected = {(0, 0): Z, (1, 0): Z, (1, 1): Z2}
        assert report.tables["leray_E2"].as_dict() == expected
        assert report.tables["E_2"].as_dict() == expected
        assert [row.group for row in report.cohomology] == [Z, Z, Z2]
        assert "degenerates at E_2" in report.notes
        print("✅ Klein bottle: E_2 = {(0,0) Z, (1,0) Z, (1,1) Z/2}")

    def test_torus(self, torus):
        f, F = torus
        report = compare_leray(f, F, dimension_skeleta(f.Y))
        assert report.passed, report.first_mismatch
        assert report.tables["leray_E2"].as_dict() == {(0, 0): Z, (1, 0): Z, (0, 1): Z, (1, 1): Z}
        assert [row.group for row in report.cohomology] == [Z, FgAbGroup.free(2), Z]

    def test_identity_map_is_trivial(self):
        X = models.circle()
        report = compare_leray(CellularMap.identity(X), CellularSheaf.constant(X), dimension_skeleta(X))
        assert report.passed
        assert report.tables["leray_E2"].as_dict() == {(0, 0): Z, (1, 0): Z}

    def test_rational_coefficients(self, klein):
        f, F = klein
        report = compare_leray(f, F, dimension_skeleta(f.Y), mode=CoefficientMode.RATIONALS)
        assert report.passed
        assert report.tables["leray_E2"].as_dict() == {(0, 0): Z, (1, 0): Z}
        assert [row.group for row in report.cohomology] == [Z, Z, ZERO]

    def test_non_cellular_base_filtration(self):
        X = models.sphere()
        f = CellularMap.identity(X)
        with pytest.raises(NotCellularError) as exc_info:
            compare_leray(f, CellularSheaf.constant(X), models.sphere_two_level(X))
        assert (exc_info.value.details["a"], exc_info.value.details["i"]) == (1, 2)

    def test_filtration_side_abutment(self, klein):
        f, F = klein
        comp = filtration_side(f, F, dimension_skeleta(f.Y))
        assert comp.abutment.group(2) == Z2
        assert comp.abutment.graded_piece(1, 2) == Z2
        assert comp.spectral.r_stab == 3

    @pytest.mark.parametrize("bundle", [models.klein_bottle, models.torus])
    def test_independence_of_base_filtration(self, bundle):
        X, f = bundle()
        F = CellularSheaf.constant(X)
        report = verify_filtration_independence(f, F, dimension_skeleta(f.Y), models.vertex_first(f.Y))
        assert report.passed, report.first_mismatch
        print("✅ E_r, r >= 2, and L^p H^n do not depend on the cellular filtration")

    def test_point_base(self):
        X = models.circle()
        point = CellComplex.point()
        f = CellularMap.constant(X, point, "pt")
        report = compare_leray(f, CellularSheaf.constant(X), one_step(point))
        assert report.passed
        assert report.tables["leray_E2"].as_dict() == {(0, 0): Z, (0, 1): Z}


# ===========================================
# Edge map
# ===========================================

class TestEdgeMap:

    @pytest.mark.parametrize("bundle", [models.klein_bottle, models.torus])
    def test_image_is_bottom_filtration_piece(self, bundle):
        X, f = bundle()
        F = CellularSheaf.constant(X)
        edge = edge_map(f, F)
        assert edge.is_cochain_map()
        comp = filtration_side(f, F, dimension_skeleta(f.Y))
        for p in (0, 1):
            assert edge.image(p) == comp.abutment.level(p, p)
        print(f"✅ edge image equals L^p H^p ({bundle.__name__})")

    def test_klein_bottle_edge_is_onto_h1(self, klein):
        f, F = klein
        m = edge_map(f, F).on_cohomology(1)
        assert m.shape == (1, 1)
        assert abs(int(m[0, 0])) == 1

    def test_torus_edge_hits_one_summand(self, torus):
        f, F = torus
        edge = edge_map(f, F)
        assert edge.on_cohomology(1).shape == (2, 1)
        assert edge.image(1).rank < edge.target.cohomology(1).numerator.rank

    def test_identity_edge_is_isomorphism(self):
        X = models.circle()
        f, F = CellularMap.identity(X), models.twisted_circle_sheaf(X)
        edge = edge_map(f, F)
        assert edge.is_cochain_map()
        H = edge.target.cohomology(1)
        assert edge.image(1) == H.numerator
        assert edge.source.cohomology(1).group == Z2

    def test_torsion_stalks_are_rejected(self):
        X = models.circle()
        stalks = {c: Stalk.presented(1, int_matrix([[2]])) for c in X.cells}
        F = CellularSheaf(X, stalks, {pair: int_matrix([[1]]) for pair in X.incidence})
        with pytest.raises(InvalidSheafError):
            edge_map(CellularMap.identity(X), F)

    def test_wrong_pullback_fails_comparison(self, torus, monkeypatch):
        from leray_engine import leray

        f, F = torus

        def vanishing(f, F, stars=None, R0=None):
            edge = edge_map(f, F, stars, R0)
            return EdgeMap(edge.source, edge.target, {})

        monkeypatch.setattr(leray, "edge_map", vanishing)
        report = compare_leray(f, F, dimension_skeleta(f.Y))
        assert not report.passed
        assert report.first_mismatch.check == "edge image equals L^p H^p"
        assert report.first_mismatch.location == {"p": 0}


# ===========================================
# S-functoriality
# ===========================================

def test_s_functoriality(klein):
    f, F = klein
    report = verify_s_functoriality(f, F, dimension_skeleta(f.Y))
    assert report.passed, report.first_mismatch
    assert report.checks > 0


def test_pushforward_filtration_matches_preimage(torus):
    f, F = torus
    Y_filt = models.vertex_first(f.Y)
    K, pushed = pushforward_filtration(f, F, Y_filt)
    skeletal = filtration_side(f, F, Y_filt).filtration
    for n in K.degrees:
        for p in range(pushed.p_min, pushed.p_max + 2):
            assert pushed.level(n, p) == skeletal.level(n, p)


def test_pushforward_filtration_vanishes_over_closed_stage(torus):
    f, F = torus
    K, pushed = pushforward_filtration(f, F, models.vertex_first(f.Y))
    level = pushed.level(0, 1)
    for i in range(K.dim(0)):
        unit = [0] * K.dim(0)
        unit[i] = 1
        over_v0 = f(K.label(0, i)[0]) == "v0"
        assert level.contains(unit) != over_v0
    assert pushed.level(1, 0) == Subgroup.full(K.dim(1))


def test_s_functoriality_detects_foreign_filtration(torus, monkeypatch):
    from leray_engine import leray

    f, F = torus
    monkeypatch.setattr(
        leray, "pushforward_filtration",
        lambda f, F, Y_filt: pushforward_filtration(f, F, dimension_skeleta(f.Y)),
    )
    report = verify_s_functoriality(f, F, models.vertex_first(f.Y))
    assert not report.passed
    assert report.first_mismatch.check == "pushed filtration equals skeletal"
    assert report.first_mismatch.location == {"a": 1, "n": 0}


# ===========================================
# Pairs
# ===========================================

class TestPairs:

    @pytest.mark.parametrize("bundle", [models.cylinder, models.moebius_band])
    def test_relative_to_fiber(self, bundle):
        X, f = bundle()
        report = pair_leray(f, {"v0"}, models.vertex_first(f.Y))
        assert report.passed, report.first_mismatch
        assert report.tables["leray_E2"].as_dict() == {(1, 0): Z}
        assert [row.group for row in report.cohomology] == [ZERO, Z, ZERO]
        print(f"✅ pair Leray relative to the fiber over v0 ({bundle.__name__})")

    def test_empty_pair_is_absolute(self, klein):
        f, F = klein
        report = pair_leray(f, set(), dimension_skeleta(f.Y), F)
        assert report.passed
        assert report.tables["leray_E2"].as_dict() == {(0, 0): Z, (1, 0): Z, (1, 1): Z2}

    def test_whole_base_gives_zero(self):
        X, f = models.moebius_band()
        report = pair_leray(f, f.Y.cells, models.vertex_first(f.Y))
        assert report.passed
        assert report.tables["leray_E2"].as_dict() == {}
        assert all(row.group.is_zero() for row in report.cohomology)

    def test_not_a_member(self):
        X, f = models.cylinder()
        with pytest.raises(NotMemberError):
            pair_leray(f, {"v1"}, models.vertex_first(f.Y))

    def test_not_closed(self):
        X, f = models.cylinder()
        with pytest.raises(NotClosedError):
            pair_leray(f, {"e0"}, models.vertex_first(f.Y))
