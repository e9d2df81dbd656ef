"""
Exact Couple - точные пары и их производные

D --α--> D --β--> E --γ--> D, точность в каждом узле.

Бистепени (p, q): α (-1, 1), β (0, 0), γ (1, 0). После k производных β имеет
бистепень (k, -k), поэтому d = β∘γ на k-й производной имеет бистепень (k+1, -k).

Узлы D хранятся в окне p_lo <= p <= p_hi; за пределами окна D неизвестно,
и проверки точности, затрагивающие такие узлы, пропускаются. Каждая
производная сдвигает p_hi на единицу вниз (D'^{p_hi} = α(D^{p_hi+1}) неизвестно).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .exact_algebra import (
    EngineError,
    FgAbGroup,
    IntMatrix,
    Subquotient,
    compose_in_coordinates,
    group_cover,
    hcat,
    hom_image,
    homology_at,
    identity,
    induced_map,
    is_exact_at,
    solve,
    subquotient,
    vector,
    zeros,
)
from .filtered_complex import CochainComplex, Filtration, Page, SpectralSequence
from .schemas import VerificationReport

logger = logging.getLogger(__name__)

Bidegree = Tuple[int, int]

ALPHA_DEGREE: Bidegree = (-1, 1)
GAMMA_DEGREE: Bidegree = (1, 0)


class NotExactError(EngineError):
    """Пара не точна в узле (node, p, q)"""
    pass


def _shift(k: Bidegree, deg: Bidegree) -> Bidegree:
    return k[0] + deg[0], k[1] + deg[1]


def _unshift(k: Bidegree, deg: Bidegree) -> Bidegree:
    return k[0] - deg[0], k[1] - deg[1]


@dataclass(frozen=True, eq=False)
class ExactCouple:
    """
    Точная пара в инвариантных координатах

    alpha/beta/gamma индексированы бистепенью источника. Отсутствующий узел E
    считается нулевым; отсутствующая матрица - нулевым отображением.
    E_cover - представление E как подфактора E предыдущей пары (для страниц).
    """
    D: Dict[Bidegree, FgAbGroup]
    E: Dict[Bidegree, FgAbGroup]
    alpha: Dict[Bidegree, IntMatrix]
    beta: Dict[Bidegree, IntMatrix]
    gamma: Dict[Bidegree, IntMatrix]
    window: Tuple[int, int]
    beta_degree: Bidegree = (0, 0)
    derivations: int = 0
    E_cover: Dict[Bidegree, Subquotient] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        D: Dict[Bidegree, FgAbGroup],
        E: Dict[Bidegree, FgAbGroup],
        alpha: Dict[Bidegree, IntMatrix],
        beta: Dict[Bidegree, IntMatrix],
        gamma: Dict[Bidegree, IntMatrix],
        window: Optional[Tuple[int, int]] = None,
    ) -> "ExactCouple":
        if window is None:
            ps = [p for (p, _) in D] or [0]
            window = (min(ps), max(ps))
        return cls(
            D=dict(D), E=dict(E), alpha=dict(alpha), beta=dict(beta), gamma=dict(gamma),
            window=window, E_cover={k: group_cover(g) for k, g in E.items()},
        )

    def in_window(self, k: Bidegree) -> bool:
        return self.window[0] <= k[0] <= self.window[1]

    def d_group(self, k: Bidegree) -> FgAbGroup:
        return self.D.get(k, FgAbGroup.zero())

    def e_group(self, k: Bidegree) -> FgAbGroup:
        return self.E.get(k, FgAbGroup.zero())

    def alpha_at(self, k: Bidegree) -> IntMatrix:
        """α: D^k -> D^{k + (-1, 1)}"""
        tgt = _shift(k, ALPHA_DEGREE)
        return self.alpha.get(k, zeros(self.d_group(tgt).ngens, self.d_group(k).ngens))

    def beta_at(self, k: Bidegree) -> IntMatrix:
        tgt = _shift(k, self.beta_degree)
        return self.beta.get(k, zeros(self.e_group(tgt).ngens, self.d_group(k).ngens))

    def gamma_at(self, k: Bidegree) -> IntMatrix:
        tgt = _shift(k, GAMMA_DEGREE)
        return self.gamma.get(k, zeros(self.d_group(tgt).ngens, self.e_group(k).ngens))

    @property
    def d_degree(self) -> Bidegree:
        return _shift(self.beta_degree, GAMMA_DEGREE)

    def d_at(self, k: Bidegree) -> IntMatrix:
        """d = β∘γ: E^k -> E^{k + d_degree}"""
        mid = _shift(k, GAMMA_DEGREE)
        return compose_in_coordinates(self.beta_at(mid), self.gamma_at(k), self.e_group(_shift(k, self.d_degree)))

    # ==================== Exactness ====================

    def exactness_failures(self) -> List[Tuple[str, int, int]]:
        """Узлы, где im ≠ ker; узлы с неизвестными соседями пропускаются"""
        failures = []
        d_nodes = sorted(k for k in self.D if self.in_window(k))
        for k in d_nodes:
            src = _unshift(k, ALPHA_DEGREE)
            if self.in_window(src):
                tgt = _shift(k, self.beta_degree)
                if not is_exact_at(self.alpha_at(src), self.d_group(k), self.beta_at(k), self.e_group(tgt)):
                    failures.append(("D:alpha-beta", k[0], k[1]))
            tgt = _shift(k, ALPHA_DEGREE)
            if self.in_window(tgt):
                src = _unshift(k, GAMMA_DEGREE)
                if not is_exact_at(self.gamma_at(src), self.d_group(k), self.alpha_at(k), self.d_group(tgt)):
                    failures.append(("D:gamma-alpha", k[0], k[1]))
        for k in sorted(self.E):
            src = _unshift(k, self.beta_degree)
            tgt = _shift(k, GAMMA_DEGREE)
            if not (self.in_window(src) and self.in_window(tgt)):
                continue
            if not is_exact_at(self.beta_at(src), self.e_group(k), self.gamma_at(k), self.d_group(tgt)):
                failures.append(("E:beta-gamma", k[0], k[1]))
        return failures

    def is_exact(self) -> bool:
        return not self.exactness_failures()

    def check_exact(self) -> None:
        """
        Raises:
            NotExactError: первый узел, где нарушена точность
        """
        failures = self.exactness_failures()
        if failures:
            node, p, q = failures[0]
            raise NotExactError(f"Couple is not exact at {node} ({p}, {q})", node=node, p=p, q=q)

    def page(self) -> Page:
        """(E, β∘γ) как страница с номером derivations + 1"""
        differentials = {}
        for k in self.E:
            tgt = _shift(k, self.d_degree)
            if self.e_group(k).is_zero() or self.e_group(tgt).is_zero():
                continue
            differentials[k] = self.d_at(k)
        entries = {k: self.E_cover.get(k) or group_cover(g) for k, g in self.E.items()}
        return Page(r=self.derivations + 1, bidegree=self.d_degree, entries=entries, differentials=differentials)


# ==================== Derivation ====================

def _solve_modulo(alpha: IntMatrix, relations: IntMatrix, y) -> Optional[list]:
    """x с α·x ≡ y по модулю столбцов relations"""
    rows = alpha.shape[0]
    system = hcat([alpha, relations], rows)
    if system.shape[1] == 0:
        return [] if all(v == 0 for v in y) else None
    sol = solve(system, y)
    if sol is None:
        return None
    return [int(x) for x in sol[:alpha.shape[1]]]


def derive(c: ExactCouple) -> ExactCouple:
    """
    Производная пара: D' = α(D), E' = ker(βγ)/im(βγ)

    α' - ограничение α, γ' - ограничение γ, β'(α x) = [β x].

    Raises:
        NotExactError: входная пара не точна
    """
    c.check_exact()
    p_lo, p_hi = c.window
    window = (p_lo, p_hi - 1)

    # === D' = image(α) ===
    d_sq: Dict[Bidegree, Subquotient] = {}
    for k in c.D:
        if not (window[0] <= k[0] <= window[1]):
            continue
        src = _unshift(k, ALPHA_DEGREE)
        d_sq[k] = hom_image(c.alpha_at(src), c.d_group(src), c.d_group(k))

    # === E' = H(E, βγ) ===
    e_sq: Dict[Bidegree, Subquotient] = {}
    for k in c.E:
        src = _unshift(k, c.d_degree)
        tgt = _shift(k, c.d_degree)
        e_sq[k] = homology_at(c.d_at(src), c.e_group(k), c.d_at(k), c.e_group(tgt))

    alpha, beta, gamma = {}, {}, {}
    for k, sq in d_sq.items():
        tgt = _shift(k, ALPHA_DEGREE)
        if tgt in d_sq and not sq.group.is_zero() and not d_sq[tgt].group.is_zero():
            alpha[k] = induced_map(c.alpha_at(k), sq, d_sq[tgt])

    for k, sq in e_sq.items():
        tgt = _shift(k, GAMMA_DEGREE)
        if tgt in d_sq and not sq.group.is_zero() and not d_sq[tgt].group.is_zero():
            gamma[k] = induced_map(c.gamma_at(k), sq, d_sq[tgt])

    beta_degree = _shift(c.beta_degree, (1, -1))
    for k, sq in d_sq.items():
        tgt = _shift(k, beta_degree)
        target = e_sq.get(tgt)
        if target is None or sq.group.is_zero() or target.group.is_zero():
            continue
        src = _unshift(k, ALPHA_DEGREE)
        a = c.alpha_at(src)
        rel = c.d_group(k).relations()
        b = c.beta_at(src)
        mat = zeros(target.group.ngens, sq.group.ngens)
        for j in range(sq.section.shape[1]):
            x = _solve_modulo(a, rel, sq.section[:, j])
            if x is None:
                raise NotExactError("Generator of image(α) has no α-preimage", node="D", p=k[0], q=k[1])
            image = b.dot(vector(x)) if b.shape[0] and b.shape[1] else vector([0] * b.shape[0])
            mat[:, j] = target.reduce(image)
        beta[k] = mat

    derived = ExactCouple(
        D={k: sq.group for k, sq in d_sq.items()},
        E={k: sq.group for k, sq in e_sq.items()},
        alpha=alpha, beta=beta, gamma=gamma,
        window=window,
        beta_degree=beta_degree,
        derivations=c.derivations + 1,
        E_cover=e_sq,
    )
    derived.check_exact()
    logger.debug(f"🔍 derived couple #{derived.derivations}: window {window}")
    return derived


def couple_pages(c: ExactCouple, r_max: int) -> List[Page]:
    """E_1 = E исходной пары, E_{r+1} = E производной пары"""
    c.check_exact()
    pages = [c.page()]
    current = c
    for _ in range(1, r_max):
        current = derive(current)
        pages.append(current.page())
    return pages


# ==================== Couple of a filtered complex ====================

def couple_from_filtration(K: CochainComplex, F: Filtration, depth: Optional[int] = None) -> ExactCouple:
    """
    D^{p,q} = H^{p+q}(F^p K), E^{p,q} = H^{p+q}(Gr^p K)

    α - включение F^{p+1} ⊆ F^p, β - проекция, γ - связывающий гомоморфизм.
    Окно D расширено на depth с обеих сторон (по умолчанию r_stab), чтобы
    r_stab производных оставались внутри окна.
    """
    ss = SpectralSequence(K, F)
    depth = ss.r_stab if depth is None else depth
    p_lo, p_hi = F.p_min - depth, F.p_max + 1 + depth

    d_sq: Dict[Bidegree, Subquotient] = {}
    cache: Dict[Tuple[int, int], Subquotient] = {}
    for p in range(p_lo, p_hi + 1):
        clamped = min(max(p, F.p_min), F.p_max + 1)
        for n in K.degrees:
            key = (clamped, n)
            if key not in cache:
                level = F.level(n, clamped)
                cycles = K.cocycles(n).intersect(level)
                bounds = F.level(n - 1, clamped).image(K.d(n - 1))
                cache[key] = subquotient(K.dim(n), cycles, bounds)
            d_sq[(p, n - p)] = cache[key]

    e_sq = {(p, q): ss.entry(1, p, q) for (p, q) in ss.support()}

    alpha, beta, gamma = {}, {}, {}
    for k, sq in d_sq.items():
        n = k[0] + k[1]
        ident = identity(K.dim(n))
        tgt = _shift(k, ALPHA_DEGREE)
        if tgt in d_sq and not sq.group.is_zero() and not d_sq[tgt].group.is_zero():
            alpha[k] = induced_map(ident, sq, d_sq[tgt])
        if k in e_sq and not sq.group.is_zero() and not e_sq[k].group.is_zero():
            beta[k] = induced_map(ident, sq, e_sq[k])
    for k, sq in e_sq.items():
        n = k[0] + k[1]
        tgt = _shift(k, GAMMA_DEGREE)
        if tgt in d_sq and not sq.group.is_zero() and not d_sq[tgt].group.is_zero():
            gamma[k] = induced_map(K.d(n), sq, d_sq[tgt])

    couple = ExactCouple(
        D={k: sq.group for k, sq in d_sq.items()},
        E={k: sq.group for k, sq in e_sq.items()},
        alpha=alpha, beta=beta, gamma=gamma,
        window=(p_lo, p_hi),
        E_cover={k: group_cover(sq.group) for k, sq in e_sq.items()},
    )
    couple.check_exact()
    return couple


def verify_couple_against_filtration(K: CochainComplex, F: Filtration, r_max: int = 0) -> VerificationReport:
    """Страницы производных пар против filtered_complex.page, по всем (p, q) и r"""
    report = VerificationReport(name="couple_vs_filtration")
    ss = SpectralSequence(K, F)
    r_max = r_max or ss.r_stab
    couple = couple_from_filtration(K, F, depth=max(r_max, ss.r_stab))
    for couple_page in couple_pages(couple, r_max):
        r = couple_page.r
        reference = ss.page(r)
        report.expect_equal("bidegree", reference.bidegree, couple_page.bidegree, r=r)
        for (p, q) in sorted(set(reference.entries) | set(couple_page.entries)):
            report.expect_equal("entry", reference.group(p, q), couple_page.group(p, q), r=r, p=p, q=q)
            report.expect_equal(
                "differential",
                reference.differential_invariants(p, q),
                couple_page.differential_invariants(p, q),
                r=r, p=p, q=q,
            )
    if report.passed:
        logger.info(f"✅ exact couple reproduces {r_max} pages ({report.checks} checks)")
    else:
        logger.warning(f"⚠️ exact couple mismatch: {report.first_mismatch}")
    return report
