"""
Exact Algebra - точная целочисленная линейная алгебра

Функционал:
- Нормальная форма Смита (SNF) с унимодулярными U, V и их обратными
- Нормальная форма Эрмита (HNF) для канонического описания подгрупп
- Подгруппы свободного модуля Z^n (генераторы по столбцам)
- Подфакторы Z/B с сечением и отображением reduce
- Индуцированные гомоморфизмы, ядра, образы, коядра, гомологии

Все матрицы - numpy массивы с dtype=object и Python int внутри
(произвольная точность, никаких float).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

logger = logging.getLogger(__name__)

IntMatrix = np.ndarray


# ==================== Errors ====================

class EngineError(Exception):
    """Базовое исключение для всех ошибок движка"""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class InvalidGroupError(EngineError):
    """Некорректные инвариантные факторы или представление группы"""
    pass


class NotASubgroupError(EngineError):
    """B не содержится в Z при построении подфактора"""
    pass


class NotInSubgroupError(EngineError):
    """Вектор вне числителя подфактора"""
    pass


class NotCompatibleError(EngineError):
    """Отображение не переводит Z в Z' или B в B'"""
    pass


class CoefficientMode(str, enum.Enum):
    """Коэффициенты вычислений"""
    INTEGERS = "z"
    RATIONALS = "q"  # кручение считается нулём


# ==================== Matrices ====================

def zeros(rows: int, cols: int) -> IntMatrix:
    return np.zeros((rows, cols), dtype=object)


def identity(n: int) -> IntMatrix:
    m = zeros(n, n)
    for i in range(n):
        m[i, i] = 1
    return m


def int_matrix(data, rows: Optional[int] = None, cols: Optional[int] = None) -> IntMatrix:
    """
    Построить точную целочисленную матрицу

    Args:
        data: вложенные списки (по строкам) или numpy массив
        rows, cols: явная форма (нужна для пустых матриц, например 3×0)

    Raises:
        ValueError: форма не совпадает с данными
    """
    entries = [[int(x) for x in row] for row in data]
    if rows is None:
        rows = len(entries)
    if cols is None:
        cols = len(entries[0]) if entries else 0
    if rows * cols == 0:
        if any(entries):
            raise ValueError(f"Expected an empty {rows}x{cols} matrix")
        return zeros(rows, cols)
    if len(entries) != rows or any(len(row) != cols for row in entries):
        raise ValueError(f"Matrix rows do not match the declared shape {rows}x{cols}")
    out = zeros(rows, cols)
    for i, row in enumerate(entries):
        for j, x in enumerate(row):
            out[i, j] = x
    return out


def vector(values: Iterable[int]) -> np.ndarray:
    values = [int(x) for x in values]
    out = np.zeros(len(values), dtype=object)
    for i, x in enumerate(values):
        out[i] = x
    return out


def matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    """Произведение матриц с корректной обработкой пустых размерностей"""
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"Shape mismatch: {a.shape} @ {b.shape}")
    if 0 in (a.shape[0], a.shape[1], b.shape[1]):
        return zeros(a.shape[0], b.shape[1])
    return a.dot(b)


def apply(a: IntMatrix, v: np.ndarray) -> np.ndarray:
    if a.shape[1] != len(v):
        raise ValueError(f"Shape mismatch: {a.shape} applied to vector of length {len(v)}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        return np.zeros(a.shape[0], dtype=object)
    return a.dot(v)


def hcat(mats: Sequence[IntMatrix], rows: int) -> IntMatrix:
    mats = [m for m in mats if m.shape[1] > 0]
    if not mats:
        return zeros(rows, 0)
    for m in mats:
        if m.shape[0] != rows:
            raise ValueError(f"Cannot concatenate a {m.shape} block into {rows} rows")
    return np.hstack(mats)


def vcat(mats: Sequence[IntMatrix], cols: int) -> IntMatrix:
    mats = [m for m in mats if m.shape[0] > 0]
    if not mats:
        return zeros(0, cols)
    return np.vstack(mats)


def block_diagonal(blocks: Sequence[IntMatrix]) -> IntMatrix:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = zeros(rows, cols)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def is_zero_matrix(m: IntMatrix) -> bool:
    return all(x == 0 for x in m.flat)


def matrices_equal(a: IntMatrix, b: IntMatrix) -> bool:
    return a.shape == b.shape and all(x == y for x, y in zip(a.flat, b.flat))


def to_lists(m: IntMatrix) -> List[List[int]]:
    return [[int(x) for x in row] for row in m.tolist()]


# ==================== Smith Normal Form ====================

@dataclass(frozen=True, eq=False)
class SmithForm:
    """D = U·M·V, U и V унимодулярны, U_inv·U = I, V·V_inv = I"""
    U: IntMatrix
    D: IntMatrix
    V: IntMatrix
    U_inv: IntMatrix
    V_inv: IntMatrix

    @cached_property
    def diagonal(self) -> List[int]:
        """Ненулевые диагональные элементы d_1 | d_2 | ..."""
        out = []
        for i in range(min(self.D.shape)):
            if self.D[i, i] == 0:
                break
            out.append(int(self.D[i, i]))
        return out

    @property
    def rank(self) -> int:
        return len(self.diagonal)


class _SmithReducer:
    """
    Приведение к SNF элементарными операциями

    Опорный элемент - минимальный по модулю ненулевой элемент.
    Работает на списках списков (быстрее поэлементного доступа к numpy).
    """

    def __init__(self, m: IntMatrix):
        self.rows, self.cols = m.shape
        self.D = [[int(x) for x in row] for row in m.tolist()] if self.rows else []
        self.U = self._eye(self.rows)
        self.U_inv = self._eye(self.rows)
        self.V = self._eye(self.cols)
        self.V_inv = self._eye(self.cols)

    @staticmethod
    def _eye(n: int) -> List[List[int]]:
        return [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    # --- row operations (left) ---

    def _add_row(self, i: int, k: int, c: int) -> None:
        """row_i += c * row_k"""
        D, U, Ui = self.D, self.U, self.U_inv
        D[i] = [a + c * b for a, b in zip(D[i], D[k])]
        U[i] = [a + c * b for a, b in zip(U[i], U[k])]
        for row in Ui:
            row[k] -= c * row[i]

    def _swap_rows(self, a: int, b: int) -> None:
        if a == b:
            return
        self.D[a], self.D[b] = self.D[b], self.D[a]
        self.U[a], self.U[b] = self.U[b], self.U[a]
        for row in self.U_inv:
            row[a], row[b] = row[b], row[a]

    def _negate_row(self, a: int) -> None:
        self.D[a] = [-x for x in self.D[a]]
        self.U[a] = [-x for x in self.U[a]]
        for row in self.U_inv:
            row[a] = -row[a]

    # --- column operations (right) ---

    def _add_col(self, j: int, k: int, c: int) -> None:
        """col_j += c * col_k"""
        for row in self.D:
            row[j] += c * row[k]
        for row in self.V:
            row[j] += c * row[k]
        Vi = self.V_inv
        Vi[k] = [a - c * b for a, b in zip(Vi[k], Vi[j])]

    def _swap_cols(self, a: int, b: int) -> None:
        if a == b:
            return
        for row in self.D:
            row[a], row[b] = row[b], row[a]
        for row in self.V:
            row[a], row[b] = row[b], row[a]
        self.V_inv[a], self.V_inv[b] = self.V_inv[b], self.V_inv[a]

    def _min_abs_entry(self, t: int) -> Optional[Tuple[int, int]]:
        best = None
        best_val = None
        for i in range(t, self.rows):
            row = self.D[i]
            for j in range(t, self.cols):
                x = row[j]
                if x and (best_val is None or abs(x) < best_val):
                    best, best_val = (i, j), abs(x)
                    if best_val == 1:
                        return best
        return best

    def _clear(self, t: int) -> None:
        D = self.D
        while True:
            changed = False
            for i in range(t + 1, self.rows):
                if D[i][t]:
                    q = D[i][t] // D[t][t]
                    if q:
                        self._add_row(i, t, -q)
                    if D[i][t]:
                        changed = True
            for j in range(t + 1, self.cols):
                if D[t][j]:
                    q = D[t][j] // D[t][t]
                    if q:
                        self._add_col(j, t, -q)
                    if D[t][j]:
                        changed = True
            if changed:
                # остатки меньше опорного по модулю: переносим минимальный на (t, t)
                best, best_val = (t, t), abs(D[t][t])
                for i in range(t + 1, self.rows):
                    if D[i][t] and abs(D[i][t]) < best_val:
                        best, best_val = (i, t), abs(D[i][t])
                for j in range(t + 1, self.cols):
                    if D[t][j] and abs(D[t][j]) < best_val:
                        best, best_val = (t, j), abs(D[t][j])
                self._swap_rows(t, best[0])
                self._swap_cols(t, best[1])
                continue
            pivot = D[t][t]
            bad_row = next(
                (i for i in range(t + 1, self.rows)
                 if any(D[i][j] % pivot for j in range(t + 1, self.cols))),
                None,
            )
            if bad_row is None:
                return
            self._add_row(t, bad_row, 1)

    def reduce(self) -> SmithForm:
        t = 0
        while t < min(self.rows, self.cols):
            pivot = self._min_abs_entry(t)
            if pivot is None:
                break
            self._swap_rows(t, pivot[0])
            self._swap_cols(t, pivot[1])
            self._clear(t)
            if self.D[t][t] < 0:
                self._negate_row(t)
            t += 1
        return SmithForm(
            U=int_matrix(self.U, self.rows, self.rows),
            D=int_matrix(self.D, self.rows, self.cols),
            V=int_matrix(self.V, self.cols, self.cols),
            U_inv=int_matrix(self.U_inv, self.rows, self.rows),
            V_inv=int_matrix(self.V_inv, self.cols, self.cols),
        )


def smith_normal_form(m: IntMatrix) -> SmithForm:
    """
    Нормальная форма Смита

    Returns:
        SmithForm с D = U·M·V диагональной, d_1 | d_2 | ..., d_i >= 0
    """
    return _SmithReducer(m).reduce()


# ==================== Hermite Normal Form ====================

def hermite_normal_form(m: IntMatrix) -> IntMatrix:
    """
    Строчная HNF: строки результата - канонический базис решётки строк M

    Опорные элементы положительны, элементы над опорным приведены в [0, pivot).
    """
    rows, cols = m.shape
    A = [[int(x) for x in row] for row in m.tolist()] if rows else []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        while True:
            nonzero = [i for i in range(r, rows) if A[i][c]]
            if not nonzero:
                break
            piv = min(nonzero, key=lambda i: abs(A[i][c]))
            A[r], A[piv] = A[piv], A[r]
            done = True
            for i in range(r + 1, rows):
                if A[i][c]:
                    q = A[i][c] // A[r][c]
                    A[i] = [a - q * b for a, b in zip(A[i], A[r])]
                    if A[i][c]:
                        done = False
            if done:
                break
        if A[r][c] == 0:
            continue
        if A[r][c] < 0:
            A[r] = [-x for x in A[r]]
        for i in range(r):
            q = A[i][c] // A[r][c]
            if q:
                A[i] = [a - q * b for a, b in zip(A[i], A[r])]
        r += 1
    return int_matrix(A[:r], r, cols)


def _hnf_coordinates(hnf: IntMatrix, v: Sequence[int]) -> Optional[List[int]]:
    """Координаты v в базисе строк HNF или None, если v вне решётки"""
    v = [int(x) for x in v]
    coords = []
    for row in hnf.tolist():
        c = next(j for j, x in enumerate(row) if x)
        if v[c] % row[c]:
            return None
        q = v[c] // row[c]
        coords.append(q)
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    if any(v):
        return None
    return coords


def kernel(m: IntMatrix) -> IntMatrix:
    """Столбцы - базис ядра M (над Z)"""
    snf = smith_normal_form(m)
    return snf.V[:, snf.rank:]


def image_basis(m: IntMatrix) -> IntMatrix:
    """Столбцы - базис образа M (решётка столбцов в HNF)"""
    return hermite_normal_form(m.T.copy()).T.copy()


def solve(m: IntMatrix, b: Sequence[int]) -> Optional[np.ndarray]:
    """Целочисленное решение M·x = b или None"""
    snf = smith_normal_form(m)
    ub = apply(snf.U, vector(b))
    y = np.zeros(m.shape[1], dtype=object)
    for i, d in enumerate(snf.diagonal):
        if ub[i] % d:
            return None
        y[i] = ub[i] // d
    if any(x != 0 for x in ub[snf.rank:]):
        return None
    return apply(snf.V, y)


# ==================== Groups ====================

class FgAbGroup(BaseModel):
    """
    Конечно порождённая абелева группа Z^rank + Z/t_1 + ... + Z/t_k

    Инвариантные факторы: t_i >= 2 и t_1 | t_2 | ...
    Представление единственно для класса изоморфизма.
    """
    model_config = ConfigDict(frozen=True)

    rank: int = Field(default=0, ge=0)
    torsion: Tuple[int, ...] = ()

    @field_validator("torsion")
    @classmethod
    def _check_divisibility(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        for t in value:
            if t < 2:
                raise ValueError(f"torsion coefficient {t} must be >= 2")
        for a, b in zip(value, value[1:]):
            if b % a:
                raise ValueError(f"torsion coefficients {a}, {b} break the divisibility chain")
        return value

    @classmethod
    def zero(cls) -> "FgAbGroup":
        return cls()

    @classmethod
    def free(cls, n: int) -> "FgAbGroup":
        return cls(rank=n)

    @classmethod
    def cyclic(cls, n: int) -> "FgAbGroup":
        return cokernel(int_matrix([[n]]))

    @property
    def ngens(self) -> int:
        """Число координат: сначала кручение, затем свободная часть"""
        return len(self.torsion) + self.rank

    @property
    def moduli(self) -> Tuple[int, ...]:
        return self.torsion + (0,) * self.rank

    @property
    def order(self) -> Optional[int]:
        if self.rank:
            return None
        out = 1
        for t in self.torsion:
            out *= t
        return out

    def is_zero(self) -> bool:
        return self.rank == 0 and not self.torsion

    def relations(self) -> IntMatrix:
        """Матрица соотношений в инвариантных координатах (ngens × len(torsion))"""
        out = zeros(self.ngens, len(self.torsion))
        for i, t in enumerate(self.torsion):
            out[i, i] = t
        return out

    def direct_sum(self, other: "FgAbGroup") -> "FgAbGroup":
        rel = block_diagonal([self.relations(), other.relations()])
        return cokernel(rel)

    def rationalize(self) -> "FgAbGroup":
        return FgAbGroup(rank=self.rank)

    def over(self, mode: CoefficientMode) -> "FgAbGroup":
        return self.rationalize() if mode == CoefficientMode.RATIONALS else self

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        if self.rank == 1:
            parts.append("Z")
        elif self.rank > 1:
            parts.append(f"Z^{self.rank}")
        parts.extend(f"Z/{t}" for t in self.torsion)
        return " + ".join(parts)


def cokernel(m: IntMatrix) -> FgAbGroup:
    """Z^rows / span(столбцов M), инварианты читаются с диагонали SNF"""
    diagonal = smith_normal_form(m).diagonal
    return FgAbGroup(
        rank=m.shape[0] - len(diagonal),
        torsion=tuple(d for d in diagonal if d > 1),
    )


# ==================== Subgroups ====================

@dataclass(frozen=True, eq=False)
class Subgroup:
    """
    Подгруппа Z^ambient_rank, заданная столбцами-генераторами

    Равенство и принадлежность - через HNF, вычисляемую по требованию.
    """
    ambient_rank: int
    generators: IntMatrix

    def __post_init__(self):
        if self.generators.shape[0] != self.ambient_rank:
            raise ValueError(
                f"Generators have {self.generators.shape[0]} rows, ambient rank is {self.ambient_rank}"
            )

    @classmethod
    def zero(cls, n: int) -> "Subgroup":
        return cls(n, zeros(n, 0))

    @classmethod
    def full(cls, n: int) -> "Subgroup":
        return cls(n, identity(n))

    @classmethod
    def spanned_by(cls, n: int, vectors: Iterable[Sequence[int]]) -> "Subgroup":
        cols = [list(v) for v in vectors]
        if not cols:
            return cls.zero(n)
        return cls(n, int_matrix(cols, len(cols), n).T.copy())

    @cached_property
    def hnf(self) -> IntMatrix:
        return hermite_normal_form(self.generators.T.copy())

    @cached_property
    def basis(self) -> IntMatrix:
        """Линейно независимые генераторы (столбцы)"""
        return self.hnf.T.copy()

    @property
    def rank(self) -> int:
        return self.hnf.shape[0]

    def is_zero(self) -> bool:
        return self.rank == 0

    def coordinates(self, v: Sequence[int]) -> Optional[List[int]]:
        return _hnf_coordinates(self.hnf, v)

    def contains(self, v: Sequence[int]) -> bool:
        return self.coordinates(v) is not None

    def contains_subgroup(self, other: "Subgroup") -> bool:
        return all(self.contains(other.generators[:, j]) for j in range(other.generators.shape[1]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subgroup):
            return NotImplemented
        return self.ambient_rank == other.ambient_rank and matrices_equal(self.hnf, other.hnf)

    def __hash__(self) -> int:
        return hash((self.ambient_rank, tuple(self.hnf.flat)))

    def __add__(self, other: "Subgroup") -> "Subgroup":
        return Subgroup(self.ambient_rank, hcat([self.basis, other.basis], self.ambient_rank))

    def image(self, f: IntMatrix) -> "Subgroup":
        return Subgroup(f.shape[0], matmul(f, self.basis))

    def intersect(self, other: "Subgroup") -> "Subgroup":
        a, b = self.basis, other.basis
        if a.shape[1] == 0 or b.shape[1] == 0:
            return Subgroup.zero(self.ambient_rank)
        k = kernel(hcat([a, -b], self.ambient_rank))
        return Subgroup(self.ambient_rank, matmul(a, k[:a.shape[1], :]))

    def preimage_within(self, f: IntMatrix, target: "Subgroup") -> "Subgroup":
        """{x ∈ self : f·x ∈ target}"""
        a = self.basis
        if a.shape[1] == 0:
            return Subgroup.zero(self.ambient_rank)
        fa = matmul(f, a)
        k = kernel(hcat([fa, -target.basis], f.shape[0]))
        return Subgroup(self.ambient_rank, matmul(a, k[:a.shape[1], :]))

    @classmethod
    def preimage(cls, f: IntMatrix, target: "Subgroup") -> "Subgroup":
        return cls.full(f.shape[1]).preimage_within(f, target)


# ==================== Subquotients ====================

@dataclass(frozen=True, eq=False)
class Subquotient:
    """
    Подфактор Z/B внутри Z^ambient_rank

    group      - класс изоморфизма Z/B
    section    - столбцы: представители генераторов group в объемлющем модуле
    reduce(v)  - координаты класса v в инвариантных координатах group
    """
    ambient_rank: int
    numerator: Subgroup
    denominator: Subgroup
    group: FgAbGroup
    section: IntMatrix
    _to_group: IntMatrix

    def reduce(self, v: Sequence[int]) -> np.ndarray:
        coords = self.numerator.coordinates(v)
        if coords is None:
            raise NotInSubgroupError("Vector is not in the numerator subgroup", vector=[int(x) for x in v])
        out = apply(self._to_group, vector(coords))
        for i, t in enumerate(self.group.torsion):
            out[i] = out[i] % t
        return out

    def relations(self) -> IntMatrix:
        return self.group.relations()


def subquotient(ambient_rank: int, numerator: Subgroup, denominator: Subgroup) -> Subquotient:
    """
    Построить подфактор Z/B

    Raises:
        NotASubgroupError: генератор B не лежит в Z
    """
    for j in range(denominator.generators.shape[1]):
        if not numerator.contains(denominator.generators[:, j]):
            raise NotASubgroupError(
                "Denominator is not contained in numerator",
                generator=[int(x) for x in denominator.generators[:, j]],
            )
    zb = numerator.basis
    r = zb.shape[1]
    rel_cols = [numerator.coordinates(denominator.basis[:, j]) for j in range(denominator.basis.shape[1])]
    rel = int_matrix(rel_cols, len(rel_cols), r).T.copy() if rel_cols else zeros(r, 0)
    snf = smith_normal_form(rel)
    diagonal = snf.diagonal
    t = len(diagonal)
    kept = [i for i, d in enumerate(diagonal) if d > 1] + list(range(t, r))
    group = FgAbGroup(rank=r - t, torsion=tuple(d for d in diagonal if d > 1))
    section = matmul(zb, snf.U_inv[:, kept]) if kept else zeros(ambient_rank, 0)
    to_group = snf.U[kept, :] if kept else zeros(0, r)
    return Subquotient(
        ambient_rank=ambient_rank,
        numerator=numerator,
        denominator=denominator,
        group=group,
        section=section,
        _to_group=to_group,
    )


def group_cover(group: FgAbGroup) -> Subquotient:
    """Группа в инвариантных координатах как подфактор Z^ngens / relations"""
    n = group.ngens
    return subquotient(n, Subgroup.full(n), Subgroup(n, group.relations()))


def induced_map(f: IntMatrix, source: Subquotient, target: Subquotient) -> IntMatrix:
    """
    Гомоморфизм подфакторов, индуцированный f

    Returns:
        Матрица target.group.ngens × source.group.ngens в инвариантных координатах

    Raises:
        NotCompatibleError: f(Z) ⊄ Z' или f(B) ⊄ B'
    """
    if f.shape != (target.ambient_rank, source.ambient_rank):
        raise NotCompatibleError(
            f"Map of shape {f.shape} does not connect ambients {source.ambient_rank} -> {target.ambient_rank}"
        )
    out = zeros(target.group.ngens, source.group.ngens)
    for k in range(source.section.shape[1]):
        image = apply(f, source.section[:, k])
        try:
            out[:, k] = target.reduce(image)
        except NotInSubgroupError as e:
            raise NotCompatibleError("Map does not send numerator into numerator", column=k) from e
    for j in range(source.denominator.generators.shape[1]):
        image = apply(f, source.denominator.generators[:, j])
        try:
            coords = target.reduce(image)
        except NotInSubgroupError as e:
            raise NotCompatibleError("Map does not send denominator into numerator", generator=j) from e
        if any(x != 0 for x in coords):
            raise NotCompatibleError("Map does not send denominator into denominator", generator=j)
    return out


# ==================== Homomorphisms between groups ====================

def _relation_span(group: FgAbGroup) -> Subgroup:
    return Subgroup(group.ngens, group.relations())


def hom_kernel(f: IntMatrix, source: FgAbGroup, target: FgAbGroup) -> Subquotient:
    z = Subgroup.preimage(f, _relation_span(target)) if target.ngens else Subgroup.full(source.ngens)
    return subquotient(source.ngens, z, _relation_span(source))


def hom_image(f: IntMatrix, source: FgAbGroup, target: FgAbGroup) -> Subquotient:
    rel = _relation_span(target)
    return subquotient(target.ngens, Subgroup(target.ngens, f) + rel, rel)


def hom_cokernel(f: IntMatrix, source: FgAbGroup, target: FgAbGroup) -> Subquotient:
    rel = _relation_span(target)
    return subquotient(target.ngens, Subgroup.full(target.ngens), Subgroup(target.ngens, f) + rel)


@dataclass(frozen=True)
class HomInvariants:
    """Инварианты гомоморфизма относительно изоморфизмов источника и цели"""
    image: FgAbGroup
    kernel: FgAbGroup
    cokernel: FgAbGroup

    def over(self, mode: CoefficientMode) -> "HomInvariants":
        return HomInvariants(self.image.over(mode), self.kernel.over(mode), self.cokernel.over(mode))


def hom_invariants(f: IntMatrix, source: FgAbGroup, target: FgAbGroup) -> HomInvariants:
    return HomInvariants(
        image=hom_image(f, source, target).group,
        kernel=hom_kernel(f, source, target).group,
        cokernel=hom_cokernel(f, source, target).group,
    )


def is_isomorphism(f: IntMatrix, source: FgAbGroup, target: FgAbGroup) -> bool:
    return hom_kernel(f, source, target).group.is_zero() and hom_cokernel(f, source, target).group.is_zero()


def homology_at(
    incoming: IntMatrix,
    middle: FgAbGroup,
    outgoing: IntMatrix,
    target: FgAbGroup,
) -> Subquotient:
    """
    Гомологии A --incoming--> B --outgoing--> C в узле B

    Все отображения заданы в инвариантных координатах групп.
    """
    n = middle.ngens
    rel = _relation_span(middle)
    z = Subgroup.preimage(outgoing, _relation_span(target)) if outgoing.shape[0] else Subgroup.full(n)
    b = Subgroup(n, incoming) + rel
    return subquotient(n, z, b)


def is_exact_at(
    incoming: IntMatrix,
    middle: FgAbGroup,
    outgoing: IntMatrix,
    target: FgAbGroup,
) -> bool:
    """im(incoming) = ker(outgoing) как решётки в накрытии middle"""
    return homology_at(incoming, middle, outgoing, target).group.is_zero()


def compose_in_coordinates(g: IntMatrix, f: IntMatrix, target: FgAbGroup) -> IntMatrix:
    """g∘f с приведением торсионных строк"""
    out = matmul(g, f)
    for i, t in enumerate(target.torsion):
        for j in range(out.shape[1]):
            out[i, j] = out[i, j] % t
    return out
