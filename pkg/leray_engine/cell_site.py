"""
Cell Site - клеточные комплексы и клеточные пучки

Функционал:
- CellComplex: конечный регулярный клеточный комплекс (градуированный посет
  с инцидентностями [σ:τ])
- CellularSheaf: стебель-представление на каждой клетке и ограничения σ ⋖ τ
- Коцепи пучка, продолжение нулём, ограничение на замкнутый подкомплекс
- Когомологии открытых множеств через комплекс цепей σ_0 < ... < σ_n
- Скелетная фильтрация S^a, проверка клеточности, d_1 как композиция

Стебли с кручением: свободный комплекс строится как конус отображения
соотношений Rel -> Gen (см. PresentedCochains), поэтому filtered_complex
всегда работает со свободными модулями.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .exact_algebra import (
    EngineError,
    FgAbGroup,
    IntMatrix,
    SmithForm,
    Subgroup,
    Subquotient,
    apply,
    cokernel,
    compose_in_coordinates,
    homology_at,
    identity,
    induced_map,
    matmul,
    matrices_equal,
    smith_normal_form,
    vector,
    zeros,
)
from .filtered_complex import CochainComplex, Filtration, SpectralSequence

logger = logging.getLogger(__name__)

CellKey = str


class InvalidCellComplexError(EngineError):
    """Нарушены размерности инцидентностей или Σ[σ:ρ][ρ:τ] ≠ 0"""
    pass


class InvalidSheafError(EngineError):
    """Ограничение не согласовано с соотношениями или не коммутирует"""
    pass


class NotOpenError(EngineError):
    """Множество клеток не замкнуто вверх"""
    pass


class NotClosedError(EngineError):
    """Множество клеток не замкнуто вниз"""
    pass


class NotCellularError(EngineError):
    """Фильтрация не клеточна для пучка; details содержит свидетеля (a, i, group)"""
    pass


class CohomologyMismatchError(EngineError):
    """Когомологии строки E_1 не совпали с прямым вычислением; details - обе таблицы"""
    pass


# ==================== Cell complexes ====================

class CellComplex:
    """
    Конечный регулярный клеточный комплекс

    cells - пары (id, dim) в порядке ввода; incidence[(σ, τ)] = [σ:τ] ≠ 0
    только для dim τ = dim σ + 1. Порядок граней - транзитивное замыкание.
    """

    def __init__(self, cells: Sequence[Tuple[CellKey, int]], incidence: Dict[Tuple[CellKey, CellKey], int]):
        self.cells: Tuple[CellKey, ...] = tuple(str(c) for c, _ in cells)
        self.dim_of: Dict[CellKey, int] = {}
        for cell, dim in cells:
            cell = str(cell)
            if cell in self.dim_of:
                raise InvalidCellComplexError(f"Duplicate cell id '{cell}'", cell=cell)
            if dim < 0:
                raise InvalidCellComplexError(f"Cell '{cell}' has negative dimension", cell=cell)
            self.dim_of[cell] = int(dim)
        self.incidence: Dict[Tuple[CellKey, CellKey], int] = {}
        for (s, t), value in incidence.items():
            s, t = str(s), str(t)
            for cell in (s, t):
                if cell not in self.dim_of:
                    raise InvalidCellComplexError(f"Incidence refers to unknown cell '{cell}'", cell=cell)
            if self.dim_of[t] != self.dim_of[s] + 1:
                raise InvalidCellComplexError(
                    f"Incidence [{s}:{t}] between dimensions {self.dim_of[s]} and {self.dim_of[t]}",
                    face=s, coface=t,
                )
            if value:
                self.incidence[(s, t)] = int(value)
        self._faces: Dict[CellKey, List[CellKey]] = {c: [] for c in self.cells}
        self._cofaces: Dict[CellKey, List[CellKey]] = {c: [] for c in self.cells}
        for (s, t) in self.incidence:
            self._faces[t].append(s)
            self._cofaces[s].append(t)
        self._check_boundary_squares()

    def _check_boundary_squares(self) -> None:
        for tau in self.cells:
            sums: Dict[CellKey, int] = {}
            via: Dict[CellKey, List[CellKey]] = {}
            for rho in self._faces[tau]:
                for sigma in self._faces[rho]:
                    sums[sigma] = sums.get(sigma, 0) + self.incidence[(sigma, rho)] * self.incidence[(rho, tau)]
                    via.setdefault(sigma, []).append(rho)
            for sigma, total in sums.items():
                if total:
                    raise InvalidCellComplexError(
                        f"Σ[{sigma}:ρ][ρ:{tau}] = {total} ≠ 0 (ρ in {via[sigma]})",
                        face=sigma, coface=tau, intermediates=via[sigma],
                    )

    # === constructors ===

    @classmethod
    def from_simplices(cls, facets: Iterable[Sequence]) -> "CellComplex":
        """
        Упорядоченный симплициальный комплекс

        Вершины упорядочены по первому появлению; [грань_i : симплекс] = (-1)^i,
        где грань_i получена удалением i-й вершины. id симплекса - вершины через '-'.
        """
        order: Dict[str, int] = {}
        facets = [[str(v) for v in f] for f in facets]
        for f in facets:
            for v in f:
                order.setdefault(v, len(order))
        simplices: Set[Tuple[str, ...]] = set()
        for f in facets:
            verts = tuple(sorted(set(f), key=order.__getitem__))
            n = len(verts)
            for mask in range(1, 1 << n):
                simplices.add(tuple(v for i, v in enumerate(verts) if mask >> i & 1))
        ordered = sorted(simplices, key=lambda s: (len(s), [order[v] for v in s]))
        name = "-".join
        cells = [(name(s), len(s) - 1) for s in ordered]
        incidence = {}
        for s in ordered:
            if len(s) < 2:
                continue
            for i in range(len(s)):
                incidence[(name(s[:i] + s[i + 1:]), name(s))] = (-1) ** i
        return cls(cells, incidence)

    @classmethod
    def product(cls, a: "CellComplex", b: "CellComplex", sep: str = "*") -> "CellComplex":
        """
        Произведение клеточных структур

        [σ×τ : σ'×τ] = [σ:σ'],  [σ×τ : σ×τ'] = (-1)^{dim σ} [τ:τ']
        """
        cells = [(f"{s}{sep}{t}", a.dim_of[s] + b.dim_of[t]) for s in a.cells for t in b.cells]
        incidence = {}
        for (s, s2), v in a.incidence.items():
            for t in b.cells:
                incidence[(f"{s}{sep}{t}", f"{s2}{sep}{t}")] = v
        for (t, t2), v in b.incidence.items():
            for s in a.cells:
                incidence[(f"{s}{sep}{t}", f"{s}{sep}{t2}")] = (-1) ** a.dim_of[s] * v
        return cls(cells, incidence)

    @classmethod
    def point(cls, name: str = "pt") -> "CellComplex":
        return cls([(name, 0)], {})

    # === structure ===

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell: CellKey) -> bool:
        return cell in self.dim_of

    @property
    def max_dim(self) -> int:
        return max(self.dim_of.values(), default=-1)

    def cells_of_dim(self, n: int) -> List[CellKey]:
        return [c for c in self.cells if self.dim_of[c] == n]

    def faces(self, cell: CellKey) -> List[CellKey]:
        return list(self._faces[cell])

    def cofaces(self, cell: CellKey) -> List[CellKey]:
        return list(self._cofaces[cell])

    def sign(self, face: CellKey, coface: CellKey) -> int:
        return self.incidence.get((face, coface), 0)

    @cached_property
    def _below(self) -> Dict[CellKey, FrozenSet[CellKey]]:
        below: Dict[CellKey, FrozenSet[CellKey]] = {}
        for cell in sorted(self.cells, key=self.dim_of.__getitem__):
            acc = {cell}
            for f in self._faces[cell]:
                acc |= below[f]
            below[cell] = frozenset(acc)
        return below

    @cached_property
    def _above(self) -> Dict[CellKey, FrozenSet[CellKey]]:
        above: Dict[CellKey, Set[CellKey]] = {c: set() for c in self.cells}
        for cell, down in self._below.items():
            for f in down:
                above[f].add(cell)
        return {c: frozenset(s) for c, s in above.items()}

    def leq(self, a: CellKey, b: CellKey) -> bool:
        """a - грань b (или a = b)"""
        return a in self._below[b]

    def down_closure(self, cells: Iterable[CellKey]) -> FrozenSet[CellKey]:
        out: Set[CellKey] = set()
        for c in cells:
            out |= self._below[self._known(c)]
        return frozenset(out)

    def up_closure(self, cells: Iterable[CellKey]) -> FrozenSet[CellKey]:
        out: Set[CellKey] = set()
        for c in cells:
            out |= self._above[self._known(c)]
        return frozenset(out)

    def star(self, cell: CellKey) -> FrozenSet[CellKey]:
        """Открытая звезда ↑σ"""
        return self._above[self._known(cell)]

    def _known(self, cell: CellKey) -> CellKey:
        cell = str(cell)
        if cell not in self.dim_of:
            raise InvalidCellComplexError(f"Unknown cell '{cell}'", cell=cell)
        return cell

    def is_closed(self, cells: Iterable[CellKey]) -> bool:
        cells = frozenset(cells)
        return self.down_closure(cells) == cells

    def is_open(self, cells: Iterable[CellKey]) -> bool:
        cells = frozenset(cells)
        return self.up_closure(cells) == cells

    def complement(self, cells: Iterable[CellKey]) -> FrozenSet[CellKey]:
        cells = set(cells)
        return frozenset(c for c in self.cells if c not in cells)

    def subcomplex(self, cells: Iterable[CellKey]) -> "CellComplex":
        """
        Raises:
            NotClosedError: множество не замкнуто вниз
        """
        cells = frozenset(self._known(c) for c in cells)
        if not self.is_closed(cells):
            missing = sorted(self.down_closure(cells) - cells)
            raise NotClosedError(f"Cell set is not downward closed, missing faces {missing}", missing=missing)
        return CellComplex(
            [(c, self.dim_of[c]) for c in self.cells if c in cells],
            {k: v for k, v in self.incidence.items() if k[0] in cells and k[1] in cells},
        )

    def euler_characteristic(self) -> int:
        return sum((-1) ** d for d in self.dim_of.values())


# ==================== Stalks and presented cochains ====================

@dataclass(frozen=True, eq=False)
class Stalk:
    """
    Представление Z^gens / relations; столбцы relations линейно независимы
    """
    gens: int
    relations: IntMatrix

    @classmethod
    def presented(cls, gens: int, relations: Optional[IntMatrix] = None) -> "Stalk":
        if relations is None or relations.shape[1] == 0:
            return cls(gens, zeros(gens, 0))
        if relations.shape[0] != gens:
            raise InvalidSheafError(f"Relation matrix has {relations.shape[0]} rows for {gens} generators")
        return cls(gens, Subgroup(gens, relations).basis)

    @classmethod
    def free(cls, n: int) -> "Stalk":
        return cls(n, zeros(n, 0))

    @classmethod
    def of_group(cls, group: FgAbGroup) -> "Stalk":
        """Представление в инвариантных координатах"""
        return cls.presented(group.ngens, group.relations())

    @property
    def nrels(self) -> int:
        return self.relations.shape[1]

    @cached_property
    def group(self) -> FgAbGroup:
        return cokernel(self.relations)

    @cached_property
    def _relation_lattice(self) -> Subgroup:
        return Subgroup(self.gens, self.relations)

    @cached_property
    def _snf(self) -> SmithForm:
        return smith_normal_form(self.relations)

    def lift(self, v) -> Optional[List[int]]:
        """x с relations·x = v (единственный, если существует)"""
        if self.nrels == 0:
            return [] if all(x == 0 for x in v) else None
        snf = self._snf
        ub = apply(snf.U, vector(v))
        y = [0] * self.nrels
        for i, d in enumerate(snf.diagonal):
            if ub[i] % d:
                return None
            y[i] = ub[i] // d
        if any(x != 0 for x in ub[snf.rank:]):
            return None
        return [int(x) for x in apply(snf.V, vector(y))]

    def is_relation(self, v) -> bool:
        return self._relation_lattice.contains(v)

    def maps_respect(self, source: "Stalk", m: IntMatrix) -> bool:
        """m·R_source ⊆ R_self"""
        image = matmul(m, source.relations)
        return all(self.is_relation(image[:, j]) for j in range(image.shape[1]))


ZERO_STALK = Stalk.free(0)


@dataclass
class PresentedCochains:
    """
    Коцепной комплекс со стеблями-представлениями

    blocks[n] - упорядоченный список (ключ, стебель) в степени n;
    maps[(n, target, source)] - блок дифференциала на образующих.
    """
    blocks: Dict[int, List[Tuple[object, Stalk]]]
    maps: Dict[Tuple[int, object, object], IntMatrix] = field(default_factory=dict)

    def _offsets(self, n: int, kind: str) -> Tuple[Dict[object, int], int]:
        offsets, total = {}, 0
        for key, stalk in self.blocks.get(n, []):
            offsets[key] = total
            total += stalk.gens if kind == "g" else stalk.nrels
        return offsets, total

    def _gen_differential(self, n: int) -> IntMatrix:
        src, src_total = self._offsets(n, "g")
        tgt, tgt_total = self._offsets(n + 1, "g")
        out = zeros(tgt_total, src_total)
        src_stalks = dict(self.blocks.get(n, []))
        tgt_stalks = dict(self.blocks.get(n + 1, []))
        for (deg, t, s), block in self.maps.items():
            if deg != n or s not in src or t not in tgt:
                continue
            rows, cols = tgt_stalks[t].gens, src_stalks[s].gens
            out[tgt[t]:tgt[t] + rows, src[s]:src[s] + cols] += block
        return out

    def _relations(self, n: int) -> IntMatrix:
        g_off, g_total = self._offsets(n, "g")
        r_off, r_total = self._offsets(n, "r")
        out = zeros(g_total, r_total)
        for key, stalk in self.blocks.get(n, []):
            out[g_off[key]:g_off[key] + stalk.gens, r_off[key]:r_off[key] + stalk.nrels] = stalk.relations
        return out

    def _lift(self, n: int, m: IntMatrix, what: str) -> IntMatrix:
        """Решить R_n · X = m поблочно"""
        g_off, _ = self._offsets(n, "g")
        r_off, r_total = self._offsets(n, "r")
        out = zeros(r_total, m.shape[1])
        for key, stalk in self.blocks.get(n, []):
            part = m[g_off[key]:g_off[key] + stalk.gens, :]
            for j in range(m.shape[1]):
                column = part[:, j]
                x = stalk.lift(column)
                if x is None:
                    raise InvalidSheafError(f"{what} does not respect the relations at {key}", cell=str(key))
                for i, value in enumerate(x):
                    out[r_off[key] + i, j] = value
        return out

    def free_complex(self) -> CochainComplex:
        """
        Конус T^n = Gen^n ⊕ Rel^{n+1}:
        D(x, y) = (d·x + R·y, -h·y - k·x), где R·h = d·R и R·k = d∘d
        """
        if not self.blocks:
            return CochainComplex(0, (), ())
        lo, hi = min(self.blocks), max(self.blocks)
        if any(stalk.nrels for _, stalk in self.blocks.get(lo, [])):
            lo -= 1
        degrees = list(range(lo, hi + 1))
        d = {n: self._gen_differential(n) for n in range(lo - 1, hi + 2)}
        R = {n: self._relations(n) for n in range(lo - 1, hi + 3)}
        h, k = {}, {}
        for n in range(lo, hi + 2):
            h[n] = self._lift(n + 1, matmul(d[n], R[n]), "restriction")
            k[n] = self._lift(n + 2, matmul(d.get(n + 1, zeros(0, d[n].shape[0])), d[n]), "composite restriction")

        dims, mats, labels = [], [], []
        for n in degrees:
            g = self._offsets(n, "g")[1]
            r = self._offsets(n + 1, "r")[1]
            dims.append(g + r)
            labels.append(self._labels(n))
        for n in degrees[:-1]:
            g0, r0 = self._offsets(n, "g")[1], self._offsets(n + 1, "r")[1]
            g1, r1 = self._offsets(n + 1, "g")[1], self._offsets(n + 2, "r")[1]
            D = zeros(g1 + r1, g0 + r0)
            D[:g1, :g0] = d[n]
            D[:g1, g0:] = R[n + 1]
            D[g1:, g0:] = -h[n + 1]
            D[g1:, :g0] = -k[n]
            mats.append(D)
        return CochainComplex(lo, tuple(dims), tuple(mats), tuple(labels))

    def _labels(self, n: int) -> Tuple[object, ...]:
        out = []
        for key, stalk in self.blocks.get(n, []):
            out.extend((key, "g", i) for i in range(stalk.gens))
        for key, stalk in self.blocks.get(n + 1, []):
            out.extend((key, "r", i) for i in range(stalk.nrels))
        return tuple(out)


def basis_indices(K: CochainComplex, keep) -> Dict[int, List[int]]:
    """Индексы базисных элементов, чей ключ удовлетворяет keep(key)"""
    return {n: [i for i in range(K.dim(n)) if keep(K.label(n, i)[0])] for n in K.degrees}


# ==================== Sheaves ====================

class CellularSheaf:
    """
    Клеточный пучок на X

    stalks[σ] - представление; restrictions[(σ, τ)] при σ ⋖ τ - матрица на
    образующих (gens_τ × gens_σ). Отсутствующий стебель = 0, ограничение = 0.
    """

    def __init__(
        self,
        X: CellComplex,
        stalks: Dict[CellKey, Stalk],
        restrictions: Dict[Tuple[CellKey, CellKey], IntMatrix],
        validate: bool = True,
    ):
        self.X = X
        self.stalks = {str(c): s for c, s in stalks.items() if s.gens}
        for c in self.stalks:
            if c not in X:
                raise InvalidSheafError(f"Stalk on unknown cell '{c}'", cell=c)
        self.restrictions: Dict[Tuple[CellKey, CellKey], IntMatrix] = {}
        for (s, t), m in restrictions.items():
            s, t = str(s), str(t)
            if (s, t) not in X.incidence:
                raise InvalidSheafError(f"Restriction {s} -> {t} is not along an incidence", face=s, coface=t)
            expected = (self.stalk(t).gens, self.stalk(s).gens)
            if m.shape != expected:
                raise InvalidSheafError(
                    f"Restriction {s} -> {t} has shape {m.shape}, expected {expected}", face=s, coface=t
                )
            self.restrictions[(s, t)] = m
        self._composites: Dict[Tuple[CellKey, CellKey], IntMatrix] = {}
        if validate:
            self._validate()

    def _validate(self) -> None:
        for (s, t), m in self.restrictions.items():
            if not self.stalk(t).maps_respect(self.stalk(s), m):
                raise InvalidSheafError(
                    f"Restriction {s} -> {t} does not respect the relations", face=s, coface=t
                )
        X = self.X
        for tau in X.cells:
            for rho in X.faces(tau):
                for sigma in X.faces(rho):
                    first = matmul(self.cover_map(rho, tau), self.cover_map(sigma, rho))
                    for other in X.faces(tau):
                        if other == rho or not X.leq(sigma, other):
                            continue
                        second = matmul(self.cover_map(other, tau), self.cover_map(sigma, other))
                        diff = first - second
                        if not all(self.stalk(tau).is_relation(diff[:, j]) for j in range(diff.shape[1])):
                            raise InvalidSheafError(
                                f"Restrictions {sigma} -> {tau} through {rho} and {other} disagree",
                                face=sigma, coface=tau, intermediates=[rho, other],
                            )

    # === constructors ===

    @classmethod
    def constant(cls, X: CellComplex, rank: int = 1) -> "CellularSheaf":
        stalks = {c: Stalk.free(rank) for c in X.cells}
        restrictions = {pair: identity(rank) for pair in X.incidence}
        return cls(X, stalks, restrictions, validate=False)

    @classmethod
    def zero(cls, X: CellComplex) -> "CellularSheaf":
        return cls(X, {}, {}, validate=False)

    # === access ===

    def stalk(self, cell: CellKey) -> Stalk:
        return self.stalks.get(cell, ZERO_STALK)

    def group(self, cell: CellKey) -> FgAbGroup:
        return self.stalk(cell).group

    def cover_map(self, s: CellKey, t: CellKey) -> IntMatrix:
        m = self.restrictions.get((s, t))
        if m is None:
            return zeros(self.stalk(t).gens, self.stalk(s).gens)
        return m

    def restriction(self, s: CellKey, t: CellKey) -> IntMatrix:
        """Ограничение для любых s ≤ t (композиция по цепочке покрытий)"""
        if s == t:
            return identity(self.stalk(s).gens)
        key = (s, t)
        cached = self._composites.get(key)
        if cached is not None:
            return cached
        if not self.X.leq(s, t):
            raise InvalidSheafError(f"'{s}' is not a face of '{t}'", face=s, coface=t)
        step = next(c for c in self.X.cofaces(s) if self.X.leq(c, t))
        out = matmul(self.restriction(step, t), self.cover_map(s, step))
        self._composites[key] = out
        return out

    def is_zero(self) -> bool:
        return all(s.group.is_zero() for s in self.stalks.values())

    def support(self) -> FrozenSet[CellKey]:
        return frozenset(c for c, s in self.stalks.items() if not s.group.is_zero())

    # === cochains ===

    def presented_cochains(self) -> PresentedCochains:
        X = self.X
        blocks = {n: [(c, self.stalk(c)) for c in X.cells_of_dim(n)] for n in range(X.max_dim + 1)}
        maps = {}
        for (s, t), sign in X.incidence.items():
            if self.stalk(s).gens and self.stalk(t).gens:
                maps[(X.dim_of[s], t, s)] = sign * self.cover_map(s, t)
        return PresentedCochains(blocks, maps)


def restrict(F: CellularSheaf, A: Iterable[CellKey]) -> CellularSheaf:
    """F|_A на замкнутом подкомплексе A"""
    sub = F.X.subcomplex(A)
    stalks = {c: F.stalk(c) for c in sub.cells}
    restrictions = {pair: F.cover_map(*pair) for pair in sub.incidence if pair in F.restrictions}
    return CellularSheaf(sub, stalks, restrictions, validate=False)


def extend_by_zero(F: CellularSheaf, U: Iterable[CellKey]) -> CellularSheaf:
    """
    j_! F|_U: стебли обнуляются вне открытого U

    Raises:
        NotOpenError: U не замкнуто вверх
    """
    U = frozenset(str(c) for c in U)
    if not F.X.is_open(U):
        missing = sorted(F.X.up_closure(U) - U)
        raise NotOpenError(f"Cell set is not upward closed, missing cofaces {missing}", missing=missing)
    stalks = {c: s for c, s in F.stalks.items() if c in U}
    restrictions = {(s, t): m for (s, t), m in F.restrictions.items() if s in U and t in U}
    return CellularSheaf(F.X, stalks, restrictions, validate=False)


def cochain_complex(X: CellComplex, F: CellularSheaf) -> CochainComplex:
    """
    Клеточные коцепи: (dα)(τ) = Σ_{σ ⋖ τ} [σ:τ] ρ_{σ⋖τ}(α_σ)

    Базисные элементы помечены (клетка, "g"|"r", i).
    """
    if F.X is not X:
        raise InvalidSheafError("Sheaf lives on a different cell complex")
    return F.presented_cochains().free_complex()


def cohomology(X: CellComplex, F: CellularSheaf) -> Dict[int, FgAbGroup]:
    """H^i(X, F) для i = 0..dim X"""
    K = cochain_complex(X, F)
    return {n: K.cohomology(n).group for n in range(0, X.max_dim + 1)}


# ==================== Open sets ====================

def strict_chains(X: CellComplex, U: Iterable[CellKey]) -> Dict[int, List[Tuple[CellKey, ...]]]:
    """Цепи σ_0 < ... < σ_n в U, сгруппированные по n"""
    U = [c for c in X.cells if c in frozenset(U)]
    up = {c: [t for t in U if t != c and X.leq(c, t)] for c in U}
    chains: Dict[int, List[Tuple[CellKey, ...]]] = {}

    def grow(chain: Tuple[CellKey, ...]) -> None:
        chains.setdefault(len(chain) - 1, []).append(chain)
        for nxt in up[chain[-1]]:
            grow(chain + (nxt,))

    for c in U:
        grow((c,))
    return chains


@dataclass(frozen=True, eq=False)
class OpenCochains:
    """Коцепи комплекса цепей открытого U со значениями в F(σ_n)"""
    cells: FrozenSet[CellKey]
    complex: CochainComplex

    def projection(self, other: "OpenCochains", n: int) -> IntMatrix:
        """Ограничение коцепей с self.cells на other.cells ⊆ self.cells"""
        index = {self.complex.label(n, i): i for i in range(self.complex.dim(n))}
        out = zeros(other.complex.dim(n), self.complex.dim(n))
        for j in range(other.complex.dim(n)):
            out[j, index[other.complex.label(n, j)]] = 1
        return out

    def cohomology(self, n: int) -> Subquotient:
        return self.complex.cohomology(n)


def open_cochains(X: CellComplex, F: CellularSheaf, U: Iterable[CellKey]) -> OpenCochains:
    """
    Raises:
        NotOpenError: U не замкнуто вверх
    """
    U = frozenset(str(c) for c in U)
    if not X.is_open(U):
        raise NotOpenError("Cohomology is taken over upward closed cell sets only", missing=sorted(X.up_closure(U) - U))
    chains = strict_chains(X, U)
    top = max(chains, default=-1)
    blocks = {n: [(ch, F.stalk(ch[-1])) for ch in chains.get(n, [])] for n in range(top + 1)}
    maps = {}
    for n in range(1, top + 1):
        for ch in chains[n]:
            if not F.stalk(ch[-1]).gens:
                continue
            for i in range(n):
                face = ch[:i] + ch[i + 1:]
                maps[(n - 1, ch, face)] = (-1) ** i * identity(F.stalk(ch[-1]).gens)
            face = ch[:-1]
            if F.stalk(face[-1]).gens:
                maps[(n - 1, ch, face)] = (-1) ** n * F.restriction(face[-1], ch[-1])
    K = PresentedCochains(blocks, maps).free_complex()
    return OpenCochains(U, K)


def open_cohomology(X: CellComplex, F: CellularSheaf, U: Iterable[CellKey]) -> Dict[int, FgAbGroup]:
    """H^i(U, F) для открытого U"""
    oc = open_cochains(X, F, U)
    return {n: oc.cohomology(n).group for n in range(0, max(X.max_dim, 0) + 1)}


# ==================== Filtered spaces ====================

class FilteredSpace:
    """
    X_0 ⊆ X_1 ⊆ ... ⊆ X_top = X замкнутыми подкомплексами, X_{-1} = ∅

    Хранится уровнем клетки: level(c) = min{a : c ∈ X_a}.
    """

    def __init__(self, X: CellComplex, levels: Dict[CellKey, int]):
        self.X = X
        self.levels: Dict[CellKey, int] = {}
        unknown = sorted(str(c) for c in levels if c not in X)
        if unknown:
            raise InvalidCellComplexError(f"Filtration names unknown cell '{unknown[0]}'", cell=unknown[0], unknown=unknown)
        for c in X.cells:
            if c not in levels:
                raise NotClosedError(f"Cell '{c}' has no filtration level", cell=c)
            if levels[c] < 0:
                raise NotClosedError(f"Cell '{c}' has negative level", cell=c)
            self.levels[c] = int(levels[c])
        for (s, t) in X.incidence:
            if self.levels[s] > self.levels[t]:
                raise NotClosedError(
                    f"Face '{s}' enters after coface '{t}': stage {self.levels[t]} is not closed",
                    face=s, coface=t, level=self.levels[t],
                )

    @classmethod
    def from_levels(cls, X: CellComplex, levels: Dict[CellKey, int]) -> "FilteredSpace":
        return cls(X, {str(k): v for k, v in levels.items()})

    @classmethod
    def from_stages(cls, X: CellComplex, stages: Sequence[Iterable[CellKey]]) -> "FilteredSpace":
        """Список X_0 ⊆ X_1 ⊆ ...; последняя стадия должна быть X"""
        levels: Dict[CellKey, int] = {}
        previous: FrozenSet[CellKey] = frozenset()
        for a, stage in enumerate(stages):
            stage = frozenset(str(c) for c in stage)
            if not previous <= stage:
                raise NotClosedError(f"Stage {a} does not contain stage {a - 1}", level=a)
            if not X.is_closed(stage):
                raise NotClosedError(f"Stage {a} is not a closed subcomplex", level=a)
            for c in stage - previous:
                levels[c] = a
            previous = stage
        if previous != frozenset(X.cells):
            raise NotClosedError("Filtration is not exhaustive", missing=sorted(frozenset(X.cells) - previous))
        return cls(X, levels)

    @property
    def top(self) -> int:
        return max(self.levels.values(), default=0)

    def stage(self, a: int) -> FrozenSet[CellKey]:
        return frozenset(c for c, lv in self.levels.items() if lv <= a)

    def stratum(self, a: int) -> FrozenSet[CellKey]:
        """Y_a° = Y_a \\ Y_{a-1}"""
        return frozenset(c for c, lv in self.levels.items() if lv == a)

    def stages(self) -> List[FrozenSet[CellKey]]:
        return [self.stage(a) for a in range(self.top + 1)]

    def is_member(self, cells: Iterable[CellKey]) -> bool:
        cells = frozenset(str(c) for c in cells)
        return not cells or cells in self.stages() or cells == frozenset(self.X.cells)


def dimension_skeleta(X: CellComplex) -> FilteredSpace:
    return FilteredSpace(X, dict(X.dim_of))


def one_step(X: CellComplex) -> FilteredSpace:
    """X_0 = X"""
    return FilteredSpace(X, {c: 0 for c in X.cells})


# ==================== Skeletal filtration ====================

def skeleta_filtration(Y: FilteredSpace, F: CellularSheaf) -> Tuple[CochainComplex, Filtration]:
    """
    F^a = коцепи с носителем вне Y_{a-1}

    Фильтрация базисная: элемент с клеткой c лежит на уровне level(c).
    """
    K = cochain_complex(Y.X, F)
    basis_levels = {n: [Y.levels[K.label(n, i)[0]] for i in range(K.dim(n))] for n in K.degrees}
    return K, Filtration.basis_aligned(K, basis_levels, p_min=0, p_max=Y.top)


def stratum_sheaf(Y: FilteredSpace, G: CellularSheaf, a: int) -> CellularSheaf:
    """G_a = j_{a!} (G|_{Y_a})|_{Y_a°} как пучок на Y_a"""
    restricted = restrict(G, Y.stage(a))
    return extend_by_zero(restricted, Y.stratum(a))


@dataclass(frozen=True)
class CellularityResult:
    cellular: bool
    witness: Optional[Tuple[int, int, FgAbGroup]] = None
    groups: Tuple[Tuple[int, int, FgAbGroup], ...] = ()

    def __bool__(self) -> bool:
        return self.cellular


def cellularity_check(Y: FilteredSpace, G: CellularSheaf) -> CellularityResult:
    """H^i(Y, G_a) = 0 при i ≠ a; иначе первый свидетель (a, i, group)"""
    groups = []
    witness = None
    for a in range(Y.top + 1):
        Ga = stratum_sheaf(Y, G, a)
        for i, g in sorted(cohomology(Ga.X, Ga).items()):
            if g.is_zero():
                continue
            groups.append((a, i, g))
            if i != a and witness is None:
                witness = (a, i, g)
    if witness is not None:
        logger.debug(f"🔍 filtration is not cellular: H^{witness[1]}(G_{witness[0]}) = {witness[2]}")
    return CellularityResult(witness is None, witness, tuple(groups))


def require_cellular(Y: FilteredSpace, G: CellularSheaf, what: str = "sheaf") -> None:
    """
    Raises:
        NotCellularError: с witness = (a, i, group)
    """
    result = cellularity_check(Y, G)
    if not result.cellular:
        a, i, g = result.witness
        raise NotCellularError(
            f"Filtration is not cellular for the {what}: H^{i}(Y, G_{a}) = {g}",
            a=a, i=i, group=str(g),
        )


def cellular_cohomology_via_E1(Y: FilteredSpace, F: CellularSheaf) -> Dict[int, FgAbGroup]:
    """
    H^i(Y, F) как когомологии строки (E_1^{•,0}, d_1)

    Raises:
        NotCellularError: фильтрация не клеточна для F
        CohomologyMismatchError: строка E_1 расходится с H^*(K)
    """
    require_cellular(Y, F)
    K, filt = skeleta_filtration(Y, F)
    e1 = SpectralSequence(K, filt).page(1)
    out = {}
    for a in range(0, Y.X.max_dim + 1):
        out[a] = homology_at(
            e1.differential(a - 1, 0), e1.group(a, 0), e1.differential(a, 0), e1.group(a + 1, 0)
        ).group
    direct = direct_cohomology(K, out)
    if direct != out:
        logger.error(f"❌ E_1 row cohomology {out} differs from direct cohomology {direct}")
        raise CohomologyMismatchError(
            "E_1 row cohomology differs from direct cohomology",
            e1_row={n: str(g) for n, g in out.items()},
            direct={n: str(g) for n, g in direct.items()},
        )
    return out


def direct_cohomology(K: CochainComplex, degrees: Iterable[int]) -> Dict[int, FgAbGroup]:
    return {n: K.cohomology(n).group for n in degrees}


# ==================== d_1 as a composition ====================

def _graded_piece(K: CochainComplex, Y: FilteredSpace, a: int) -> Tuple[CochainComplex, Dict[int, List[int]]]:
    idx = basis_indices(K, lambda cell: Y.levels[cell] == a)
    above = basis_indices(K, lambda cell: Y.levels[cell] >= a)
    sub = K.subcomplex(above)
    drop = {n: [j for j, i in enumerate(above[n]) if Y.levels[K.label(n, i)[0]] > a] for n in K.degrees}
    return sub.quotient(drop), idx


def d1_by_composition(Y: FilteredSpace, F: CellularSheaf, a: int, b: int) -> IntMatrix:
    """
    d_1: H^{a+b}(Y, F_a) -> H^{a+b+1}(Y, F_{a+1})

    Коцикл на Y_a° продолжается нулём, к нему применяется d, и берётся часть
    на Y_{a+1}° (связывающий гомоморфизм тройки). Координаты - инвариантные
    координаты когомологий градуированных кусков.
    """
    K = cochain_complex(Y.X, F)
    n = a + b
    source_piece, source_idx = _graded_piece(K, Y, a)
    target_piece, target_idx = _graded_piece(K, Y, a + 1)
    H_src = source_piece.cohomology(n)
    H_tgt = target_piece.cohomology(n + 1)
    out = zeros(H_tgt.group.ngens, H_src.group.ngens)
    d = K.d(n)
    for j in range(H_src.section.shape[1]):
        full = vector([0] * K.dim(n))
        for pos, i in enumerate(source_idx.get(n, [])):
            full[i] = H_src.section[pos, j]
        image = apply(d, full)
        part = [image[i] for i in target_idx.get(n + 1, [])]
        out[:, j] = H_tgt.reduce(part)
    return out


def verify_d1_composition(Y: FilteredSpace, F: CellularSheaf) -> bool:
    """
    Матрица d_1 страницы E_1 совпадает с композицией после перехода
    в координаты когомологий градуированных кусков
    """
    K, filt = skeleta_filtration(Y, F)
    e1 = SpectralSequence(K, filt).page(1)
    pieces = {a: _graded_piece(K, Y, a) for a in range(Y.top + 2)}

    def to_piece(a: int, b: int) -> IntMatrix:
        n = a + b
        piece, idx = pieces[a]
        proj = zeros(piece.dim(n), K.dim(n))
        for pos, i in enumerate(idx.get(n, [])):
            proj[pos, i] = 1
        return induced_map(proj, e1.entries[(a, b)], piece.cohomology(n))

    for (a, b), entry in e1.entries.items():
        if (a + 1, b) not in e1.entries:
            continue
        composed = d1_by_composition(Y, F, a, b)
        left = compose_in_coordinates(composed, to_piece(a, b), pieces[a + 1][0].cohomology(a + b + 1).group)
        right = compose_in_coordinates(to_piece(a + 1, b), e1.differential(a, b), pieces[a + 1][0].cohomology(a + b + 1).group)
        if not matrices_equal(left, right):
            logger.warning(f"⚠️ d_1 mismatch at ({a}, {b})")
            return False
    return True
