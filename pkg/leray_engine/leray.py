"""
Leray - клеточные отображения, высшие прямые образы и сравнение Лере

Функционал:
- CellularMap: сохраняющее порядок, не повышающее размерность отображение клеток
- R^q f_* F: стебель в σ = H^q(f^{-1}(↑σ), F), ограничения из вложений звёзд
- E_2 Лере: H^p(Y, R^q f_* F)
- compare_leray: E_2 Лере против спектральной последовательности X_• = f^{-1}Y_•
- Независимость от клеточной фильтрации базы
- S-функториальность на уровне коцепей
- Последовательность Лере для пар через продолжение нулём
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

from .cell_site import (
    CellComplex,
    CellKey,
    CellularSheaf,
    FilteredSpace,
    InvalidSheafError,
    OpenCochains,
    Stalk,
    basis_indices,
    cochain_complex,
    cohomology,
    extend_by_zero,
    open_cochains,
    require_cellular,
    restrict,
    skeleta_filtration,
)
from .exact_algebra import (
    CoefficientMode,
    EngineError,
    FgAbGroup,
    IntMatrix,
    Subgroup,
    induced_map,
    kernel,
    matmul,
    matrices_equal,
    subquotient,
    zeros,
)
from .filtered_complex import Abutment, CochainComplex, Filtration, SpectralSequence, abutment
from .schemas import BigradedTable, VerificationReport

logger = logging.getLogger(__name__)


class InvalidCellularMapError(EngineError):
    """Отображение не задано на клетке, не сохраняет порядок или повышает размерность"""
    pass


class NotMemberError(EngineError):
    """Замкнутое подмножество не является членом фильтрации Y_•"""
    pass


# ==================== Cellular maps ====================

class CellularMap:
    """
    f: X -> Y на уровне посетов клеток

    assignment[x] = f(x); σ ≤ σ' ⇒ f(σ) ≤ f(σ'), dim f(σ) ≤ dim σ.
    """

    def __init__(self, X: CellComplex, Y: CellComplex, assignment: Dict[CellKey, CellKey]):
        self.X = X
        self.Y = Y
        self.assignment: Dict[CellKey, CellKey] = {str(k): str(v) for k, v in assignment.items()}
        self._validate()

    def _validate(self) -> None:
        X, Y = self.X, self.Y
        for x in X.cells:
            y = self.assignment.get(x)
            if y is None:
                raise InvalidCellularMapError(f"Cell '{x}' has no image", cell=x)
            if y not in Y:
                raise InvalidCellularMapError(f"Cell '{x}' maps to unknown cell '{y}'", cell=x, image=y)
            if Y.dim_of[y] > X.dim_of[x]:
                raise InvalidCellularMapError(
                    f"Cell '{x}' of dimension {X.dim_of[x]} maps to '{y}' of dimension {Y.dim_of[y]}",
                    cell=x, image=y,
                )
        extra = sorted(set(self.assignment) - set(X.cells))
        if extra:
            raise InvalidCellularMapError(f"Assignment mentions unknown cells {extra}", cells=extra)
        for (s, t) in X.incidence:
            if not Y.leq(self(s), self(t)):
                raise InvalidCellularMapError(
                    f"Map is not order preserving: {s} < {t} but {self(s)} is not a face of {self(t)}",
                    face=s, coface=t,
                )
        for y in Y.cells:
            pre = self.preimage(Y.star(y))
            if not X.is_open(pre):
                raise InvalidCellularMapError(f"Preimage of the star of '{y}' is not open", cell=y)

    @classmethod
    def identity(cls, X: CellComplex) -> "CellularMap":
        return cls(X, X, {c: c for c in X.cells})

    @classmethod
    def constant(cls, X: CellComplex, Y: CellComplex, target: CellKey) -> "CellularMap":
        """Отображение в вершину target"""
        return cls(X, Y, {c: target for c in X.cells})

    def __call__(self, cell: CellKey) -> CellKey:
        return self.assignment[cell]

    def preimage(self, cells: Iterable[CellKey]) -> FrozenSet[CellKey]:
        cells = frozenset(str(c) for c in cells)
        return frozenset(x for x in self.X.cells if self.assignment[x] in cells)

    def preimage_star(self, cell: CellKey) -> FrozenSet[CellKey]:
        """f^{-1}(↑σ), открытое в X"""
        return self.preimage(self.Y.star(cell))


def preimage_filtration(f: CellularMap, Y_filt: FilteredSpace) -> FilteredSpace:
    """X_a = f^{-1}(Y_a)"""
    if Y_filt.X is not f.Y:
        raise InvalidCellularMapError("Filtration lives on a different target complex")
    return FilteredSpace(f.X, {x: Y_filt.levels[f(x)] for x in f.X.cells})


# ==================== Higher direct images ====================

def _star_cochains(f: CellularMap, F: CellularSheaf) -> Dict[CellKey, OpenCochains]:
    if F.X is not f.X:
        raise InvalidCellularMapError("Sheaf lives on a different source complex")
    return {y: open_cochains(f.X, F, f.preimage_star(y)) for y in f.Y.cells}


def _direct_image_from(f: CellularMap, stars: Dict[CellKey, OpenCochains], q: int) -> CellularSheaf:
    Y = f.Y
    H = {y: oc.cohomology(q) for y, oc in stars.items()}
    stalks = {y: Stalk.of_group(h.group) for y, h in H.items() if not h.group.is_zero()}
    restrictions = {}
    for (s, t) in Y.incidence:
        if s not in stalks or t not in stalks:
            continue
        proj = stars[s].projection(stars[t], q)
        restrictions[(s, t)] = induced_map(proj, H[s], H[t])
    return CellularSheaf(Y, stalks, restrictions)


def higher_direct_image(f: CellularMap, F: CellularSheaf, q: int) -> CellularSheaf:
    """
    R^q f_* F на Y

    Стебель в σ - H^q(f^{-1}(↑σ), F) в инвариантных координатах; ограничение
    σ ⋖ τ индуцировано проекцией коцепей на f^{-1}(↑τ) ⊆ f^{-1}(↑σ).
    """
    return _direct_image_from(f, _star_cochains(f, F), q)


def higher_direct_images(
    f: CellularMap,
    F: CellularSheaf,
    q_max: Optional[int] = None,
    stars: Optional[Dict[CellKey, OpenCochains]] = None,
) -> Dict[int, CellularSheaf]:
    """R^q f_* F для q = 0..q_max (по умолчанию dim X)"""
    q_max = f.X.max_dim if q_max is None else q_max
    stars = stars if stars is not None else _star_cochains(f, F)
    images = {q: _direct_image_from(f, stars, q) for q in range(q_max + 1)}
    for q, R in images.items():
        if not R.is_zero():
            logger.debug(f"🔍 R^{q} f_* is supported on {sorted(R.support())}")
    return images


def leray_e2(
    f: CellularMap,
    F: CellularSheaf,
    images: Optional[Dict[int, CellularSheaf]] = None,
) -> BigradedTable:
    """E_2^{p,q} = H^p(Y, R^q f_* F)"""
    images = images if images is not None else higher_direct_images(f, F)
    groups: Dict[Tuple[int, int], FgAbGroup] = {}
    for q, R in images.items():
        for p, g in cohomology(f.Y, R).items():
            groups[(p, q)] = g
    return BigradedTable.from_groups(groups)


# ==================== Edge map ====================

@dataclass(frozen=True, eq=False)
class EdgeMap:
    """
    Обратный образ коцепей C^•(Y, f_*F) -> C^•(X, F)

    Коцепь на p-клетке y - сечение F над f^{-1}(↑y). Её образ на p-клетке x
    с f(x) = y - значение сечения в x; на клетках с dim f(x) < dim x - ноль.
    """
    source: CochainComplex
    target: CochainComplex
    pullback: Dict[int, IntMatrix]

    def matrix(self, n: int) -> IntMatrix:
        return self.pullback.get(n, zeros(self.target.dim(n), self.source.dim(n)))

    def is_cochain_map(self) -> bool:
        lo = min(self.source.n_min, self.target.n_min)
        hi = max(self.source.n_max, self.target.n_max)
        return all(
            matrices_equal(matmul(self.target.d(n), self.matrix(n)), matmul(self.matrix(n + 1), self.source.d(n)))
            for n in range(lo, hi)
        )

    def on_cohomology(self, n: int) -> IntMatrix:
        """
        H^n(Y, f_*F) -> H^n(X, F) в инвариантных координатах

        Raises:
            NotCompatibleError: pullback не переводит коциклы в коциклы
        """
        return induced_map(self.matrix(n), self.source.cohomology(n), self.target.cohomology(n))

    def image(self, n: int) -> Subgroup:
        """Образ в H^n(X, F) как решётка коциклов по модулю кограниц"""
        H = self.target.cohomology(n)
        return Subgroup(self.target.dim(n), matmul(H.section, self.on_cohomology(n))) + H.denominator


def edge_map(
    f: CellularMap,
    F: CellularSheaf,
    stars: Optional[Dict[CellKey, OpenCochains]] = None,
    R0: Optional[CellularSheaf] = None,
) -> EdgeMap:
    """
    Raises:
        InvalidSheafError: у F есть стебли с кручением
    """
    torsion = sorted(c for c in f.X.cells if F.stalk(c).nrels)
    if torsion:
        raise InvalidSheafError("Edge pullback is built for free stalks only", cells=torsion)
    stars = stars if stars is not None else _star_cochains(f, F)
    R0 = R0 if R0 is not None else _direct_image_from(f, stars, 0)
    source, target = cochain_complex(f.Y, R0), cochain_complex(f.X, F)
    sections = {y: oc.cohomology(0) for y, oc in stars.items()}

    pullback = {}
    for n in target.degrees:
        index = {target.label(n, i): i for i in range(target.dim(n))}
        out = zeros(target.dim(n), source.dim(n))
        for j in range(source.dim(n)):
            y, _, k = source.label(n, j)
            oc = stars[y].complex
            open_index = {oc.label(0, i): i for i in range(oc.dim(0))}
            for x in f.X.cells:
                if f(x) != y or f.X.dim_of[x] != n:
                    continue
                for i in range(F.stalk(x).gens):
                    out[index[(x, "g", i)], j] = sections[y].section[open_index[((x,), "g", i)], k]
        pullback[n] = out
    return EdgeMap(source, target, pullback)


def _check_edge_map(report: VerificationReport, f: CellularMap, F: CellularSheaf, comp: "LerayComputation", stars, R0) -> None:
    """Образ краевого отображения равен L^p H^p и изоморфен E_∞^{p,0}"""
    if any(F.stalk(c).nrels for c in f.X.cells):
        report.notes.append("edge map not checked: torsion stalks")
        return
    edge = edge_map(f, F, stars, R0)
    if not report.expect("edge pullback is a cochain map", edge.is_cochain_map()):
        return
    stable = comp.spectral.stable_page()
    for p in range(0, f.Y.max_dim + 1):
        H = comp.complex.cohomology(p)
        image = edge.image(p)
        report.expect("edge image equals L^p H^p", image == comp.abutment.level(p, p), p=p)
        report.expect_equal(
            "edge image is E_infinity^{p,0}",
            stable.group(p, 0),
            subquotient(H.ambient_rank, image, H.denominator).group,
            p=p,
        )


# ==================== Comparison ====================

@dataclass(frozen=True, eq=False)
class LerayComputation:
    """Спектральная последовательность фильтрации X_• = f^{-1}Y_• для пучка F на X"""
    filtered_space: FilteredSpace
    complex: CochainComplex
    filtration: Filtration
    spectral: SpectralSequence
    abutment: Abutment


def filtration_side(f: CellularMap, F: CellularSheaf, Y_filt: FilteredSpace) -> LerayComputation:
    X_filt = preimage_filtration(f, Y_filt)
    K, filt = skeleta_filtration(X_filt, F)
    ss = SpectralSequence(K, filt)
    return LerayComputation(X_filt, K, filt, ss, abutment(K, filt, spectral=ss, check=False))


def _record_pages(
    report: VerificationReport,
    comp: LerayComputation,
    r_max: int,
    mode: CoefficientMode,
) -> None:
    ss = comp.spectral
    for pg in ss.pages(r_max, r_min=2):
        report.tables[f"E_{pg.r}"] = pg.table(mode)
    report.cohomology = comp.abutment.rows(mode)
    report.filtration = comp.abutment.filtration_rows(mode)


def _check_abutment(report: VerificationReport, comp: LerayComputation, direct: Dict[int, FgAbGroup]) -> None:
    ss, ab = comp.spectral, comp.abutment
    stable = ss.stable_page()
    for n, g in sorted(direct.items()):
        report.expect_equal("abutment equals direct cohomology", g, ab.group(n), n=n)
    for (p, n), g in sorted(ab.graded.items()):
        report.expect_equal("E_infinity equals graded abutment", g, stable.group(p, n - p), p=p, n=n)


def _degeneration_note(ss: SpectralSequence) -> str:
    stable = ss.stable_page().groups()
    for r in range(2, ss.r_stab + 1):
        if ss.page(r).groups() == stable:
            return f"degenerates at E_{r}"
    return f"stabilizes at E_{ss.r_stab}"


def compare_leray(
    f: CellularMap,
    F: CellularSheaf,
    Y_filt: FilteredSpace,
    r_max: int = 0,
    mode: CoefficientMode = CoefficientMode.INTEGERS,
) -> VerificationReport:
    """
    E_2^{p,q}(X_•, F) ≅ H^p(Y, R^q f_* F) для X_• = f^{-1}Y_•

    Также: страницы E_r, r ≥ 2, и фильтрация абатмента записываются в отчёт;
    H^•(X, F) сверяется с прямым вычислением, E_∞ - с Gr, краевое
    отображение H^p(Y, f_*F) -> H^p(X, F) - с L^p H^p и E_∞^{p,0}.

    Raises:
        NotCellularError: Y_• не клеточна для некоторого R^q f_* F
    """
    stars = _star_cochains(f, F)
    images = higher_direct_images(f, F, stars=stars)
    for q, R in images.items():
        require_cellular(Y_filt, R, what=f"R^{q} f_* sheaf")

    report = VerificationReport(name="leray")
    leray = leray_e2(f, F, images)
    comp = filtration_side(f, F, Y_filt)
    ss = comp.spectral
    e2 = ss.page(2).table(with_differentials=False)
    for (p, q) in sorted(set(leray.as_dict()) | set(e2.as_dict())):
        report.expect_equal("E_2 matches H^p(Y, R^q f_*)", leray.get(p, q), e2.get(p, q), p=p, q=q)
    report.tables["leray_E2"] = leray.over(mode)

    _record_pages(report, comp, r_max or ss.r_stab, mode)
    _check_abutment(report, comp, cohomology(f.X, F))

    _check_edge_map(report, f, F, comp, stars, images.get(0))

    report.notes.append(_degeneration_note(ss))
    if report.passed:
        logger.info(f"✅ Leray comparison passed ({report.checks} checks, {report.notes[-1]})")
    else:
        logger.warning(f"⚠️ Leray comparison failed: {report.first_mismatch}")
    return report


def verify_filtration_independence(
    f: CellularMap,
    F: CellularSheaf,
    first: FilteredSpace,
    second: FilteredSpace,
) -> VerificationReport:
    """
    Две клеточные фильтрации базы дают одинаковые страницы E_r, r ≥ 2,
    и одинаковую фильтрацию L^p H^n как подгруппы одних и тех же коцепей
    """
    images = higher_direct_images(f, F)
    for Y_filt in (first, second):
        for q, R in images.items():
            require_cellular(Y_filt, R, what=f"R^{q} f_* sheaf")
    report = VerificationReport(name="filtration_independence")
    a, b = filtration_side(f, F, first), filtration_side(f, F, second)
    r_top = max(a.spectral.r_stab, b.spectral.r_stab)
    for r in range(2, r_top + 1):
        left, right = a.spectral.page(r), b.spectral.page(r)
        for (p, q) in sorted(set(left.groups()) | set(right.groups())):
            report.expect_equal("E_r agrees", left.group(p, q), right.group(p, q), r=r, p=p, q=q)
    p_lo = min(a.abutment.p_min, b.abutment.p_min)
    p_hi = max(a.abutment.p_max, b.abutment.p_max) + 1
    for n in a.complex.degrees:
        for p in range(p_lo, p_hi + 1):
            report.expect("L^p H^n agrees", a.abutment.level(p, n) == b.abutment.level(p, n), p=p, n=n)
    if not report.passed:
        logger.warning(f"⚠️ Filtrations disagree: {report.first_mismatch}")
    return report


# ==================== S-functoriality ====================

def _label_embedding(small: CochainComplex, big: CochainComplex, n: int) -> IntMatrix:
    index = {big.label(n, i): i for i in range(big.dim(n))}
    out = zeros(big.dim(n), small.dim(n))
    for j in range(small.dim(n)):
        out[index[small.label(n, j)], j] = 1
    return out


def pushforward_filtration(f: CellularMap, F: CellularSheaf, Y_filt: FilteredSpace) -> Tuple[CochainComplex, Filtration]:
    """
    Фильтрация коцепей f_* C^•(X, F) стадиями базы

    F^a K^n - ядро ограничения K^n -> C^n(f^{-1}(Y_{a-1}), F|): коцепи прямого
    образа, обращающиеся в ноль над замкнутой стадией Y_{a-1}.
    """
    if Y_filt.X is not f.Y:
        raise InvalidCellularMapError("Filtration lives on a different target complex")
    K = cochain_complex(f.X, F)
    levels = {n: [] for n in K.degrees}
    for a in range(0, Y_filt.top + 1):
        closed = f.preimage(Y_filt.stage(a - 1))
        over = None
        if closed:
            A = restrict(F, closed)
            over = cochain_complex(A.X, A)
        for n in K.degrees:
            proj = _label_embedding(over, K, n).T.copy() if over is not None else zeros(0, K.dim(n))
            if proj.shape[0] == 0 or K.dim(n) == 0:
                levels[n].append(Subgroup.full(K.dim(n)))
            else:
                levels[n].append(Subgroup(K.dim(n), kernel(proj)))
    return K, Filtration(K, 0, Y_filt.top, {n: tuple(chain) for n, chain in levels.items()})


def verify_s_functoriality(f: CellularMap, F: CellularSheaf, Y_filt: FilteredSpace) -> VerificationReport:
    """
    S^a(X_•, F) = коцепи k_{(a-1)!} F|_{X \\ X_{a-1}} совпадают с уровнем a
    фильтрации, построенной по Y_• на прямом образе коцепей
    """
    report = VerificationReport(name="s_functoriality")
    X_filt = preimage_filtration(f, Y_filt)
    K, skeletal = skeleta_filtration(X_filt, F)
    _, pushed = pushforward_filtration(f, F, Y_filt)
    for a in range(0, Y_filt.top + 1):
        U = f.preimage(f.Y.complement(Y_filt.stage(a - 1)))
        ext = cochain_complex(f.X, extend_by_zero(F, U))
        for n in K.degrees:
            emb = _label_embedding(ext, K, n)
            emb_next = _label_embedding(ext, K, n + 1)
            report.expect(
                "extension by zero is a subcomplex",
                matrices_equal(matmul(K.d(n), emb), matmul(emb_next, ext.d(n))),
                a=a, n=n,
            )
            sections = Subgroup(K.dim(n), emb)
            report.expect("pushed filtration equals skeletal", skeletal.level(n, a) == pushed.level(n, a), a=a, n=n)
            report.expect("extension by zero equals skeletal level", sections == skeletal.level(n, a), a=a, n=n)
    return report


# ==================== Pairs ====================

def pair_leray(
    f: CellularMap,
    Y_tilde: Iterable[CellKey],
    Y_filt: FilteredSpace,
    F: Optional[CellularSheaf] = None,
    mode: CoefficientMode = CoefficientMode.INTEGERS,
) -> VerificationReport:
    """
    Последовательность Лере пары (X, X̃) -> (Y, Ỹ), X̃ = f^{-1}Ỹ

    Проверяет j_! R^q f_* F = R^q f_* J_! F постебельно, совпадение
    H^p(Y, j_! R^q f_* F) с E_2 фильтрации (X_•, J_! F) и абатмент против
    относительных коцепей H^•(X, X̃).

    Raises:
        NotClosedError: Ỹ не замкнуто
        NotMemberError: Ỹ не член Y_•
        NotCellularError: Y_• не клеточна для j_! R^q f_* F
    """
    Y, X = f.Y, f.X
    F = F if F is not None else CellularSheaf.constant(X)
    Y_tilde = Y.subcomplex(Y_tilde).cells
    if not Y_filt.is_member(Y_tilde):
        raise NotMemberError(f"Closed set {sorted(Y_tilde)} is not a stage of the filtration", cells=sorted(Y_tilde))
    X_tilde = f.preimage(Y_tilde)
    U, V = Y.complement(Y_tilde), X.complement(X_tilde)
    J_F = extend_by_zero(F, V)

    report = VerificationReport(name="pair_leray")
    direct_images = higher_direct_images(f, F)
    relative_images = higher_direct_images(f, J_F)
    exchanged = {q: extend_by_zero(R, U) for q, R in direct_images.items()}
    for q, R in relative_images.items():
        j_R = exchanged[q]
        for y in Y.cells:
            report.expect_equal("j_! R^q equals R^q J_! on stalks", j_R.group(y), R.group(y), q=q)
        for (s, t) in Y.incidence:
            if s in U and t in U:
                report.expect(
                    "j_! R^q equals R^q J_! on restrictions",
                    matrices_equal(j_R.cover_map(s, t), R.cover_map(s, t)),
                    q=q,
                )
        require_cellular(Y_filt, j_R, what=f"j_! R^{q} f_* sheaf")

    leray = leray_e2(f, J_F, exchanged)
    comp = filtration_side(f, J_F, Y_filt)
    e2 = comp.spectral.page(2).table(with_differentials=False)
    for (p, q) in sorted(set(leray.as_dict()) | set(e2.as_dict())):
        report.expect_equal("E_2 matches H^p(Y, j_! R^q f_*)", leray.get(p, q), e2.get(p, q), p=p, q=q)
    report.tables["leray_E2"] = leray.over(mode)

    K = cochain_complex(X, F)
    relative = K.subcomplex(basis_indices(K, lambda cell: cell not in X_tilde))
    direct = {n: relative.cohomology(n).group for n in range(0, X.max_dim + 1)}
    _record_pages(report, comp, comp.spectral.r_stab, mode)
    _check_abutment(report, comp, direct)
    report.notes.append(_degeneration_note(comp.spectral))
    if report.passed:
        logger.info(f"✅ Pair Leray passed relative to {sorted(Y_tilde)} ({report.checks} checks)")
    else:
        logger.warning(f"⚠️ Pair Leray failed: {report.first_mismatch}")
    return report
