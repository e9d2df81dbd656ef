"""
Pydantic schemas для входных документов и отчётов

Входные документы (по одному на объект):
- CellComplexDocument: клетки с гранями или список симплексов
- SheafDocument: стебли (образующие + соотношения) и ограничения
- ComplexDocument / FiltrationDocument: явный коцепной комплекс и фильтрация
- MapDocument: клеточное отображение с встроенными source/target

Отчёты сериализуются через model_dump_json и читаются обратно
через model_validate_json без потерь.
"""

from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .exact_algebra import CoefficientMode, FgAbGroup, HomInvariants

Matrix = List[List[int]]
CellId = Union[str, int]


# ==================== Input documents ====================

class FaceRef(BaseModel):
    id: str
    sign: int


class CellDocument(BaseModel):
    id: str
    dim: int = Field(ge=0)
    faces: List[FaceRef] = []


class CellComplexDocument(BaseModel):
    """Клеточный комплекс: либо cells, либо simplices (упорядоченные вершины)"""
    model_config = ConfigDict(extra="forbid")

    cells: Optional[List[CellDocument]] = None
    simplices: Optional[List[List[CellId]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.cells is None) == (self.simplices is None):
            raise ValueError("exactly one of 'cells' or 'simplices' must be given")
        return self


class StalkDocument(BaseModel):
    gens: int = Field(ge=0)
    relations: Matrix = []

    @model_validator(mode="after")
    def _relation_rows(self):
        if self.relations and len(self.relations) != self.gens:
            raise ValueError(f"relations must have {self.gens} rows (one per generator)")
        return self


class RestrictionDocument(BaseModel):
    source: str
    target: str
    matrix: Matrix


class SheafDocument(BaseModel):
    """Клеточный пучок; отсутствующий стебель = 0, отсутствующее ограничение = 0"""
    model_config = ConfigDict(extra="forbid")

    stalks: Dict[str, StalkDocument] = {}
    restrictions: List[RestrictionDocument] = []


class ComplexDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_min: int = 0
    dims: List[int]
    differentials: List[Matrix] = []

    @model_validator(mode="after")
    def _differential_count(self):
        expected = max(len(self.dims) - 1, 0)
        if len(self.differentials) != expected:
            raise ValueError(f"expected {expected} differentials for {len(self.dims)} degrees")
        return self


class SubgroupLevel(BaseModel):
    p: int
    n: int
    generators: Matrix = []  # столбцы-генераторы, построчно (dims[n] строк)


class FiltrationDocument(BaseModel):
    """
    Фильтрация одного из трёх видов:
    - levels: клетка -> a (замкнутые подкомплексы X_a базы или пространства)
    - basis_levels: по каждой степени уровень каждого базисного элемента
    - subgroups: явные генераторы F^p K^n
    """
    model_config = ConfigDict(extra="forbid")

    levels: Optional[Dict[str, int]] = None
    basis_levels: Optional[List[List[int]]] = None
    subgroups: Optional[List[SubgroupLevel]] = None
    p_min: Optional[int] = None
    p_max: Optional[int] = None

    @model_validator(mode="after")
    def _one_kind(self):
        given = [x is not None for x in (self.levels, self.basis_levels, self.subgroups)]
        if sum(given) != 1:
            raise ValueError("exactly one of 'levels', 'basis_levels' or 'subgroups' must be given")
        return self


class MapDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: CellComplexDocument
    target: CellComplexDocument
    assignment: Dict[str, str]


# ==================== Tables ====================

class TableEntry(BaseModel):
    p: int
    q: int
    group: FgAbGroup


class DifferentialEntry(BaseModel):
    """d_r в точке (p, q); rank - это группа-образ"""
    p: int
    q: int
    image: FgAbGroup
    kernel: FgAbGroup
    cokernel: FgAbGroup

    @classmethod
    def from_invariants(cls, p: int, q: int, inv: HomInvariants) -> "DifferentialEntry":
        return cls(p=p, q=q, image=inv.image, kernel=inv.kernel, cokernel=inv.cokernel)


class BigradedTable(BaseModel):
    """Конечная биградуированная таблица групп (только ненулевые клетки)"""
    entries: List[TableEntry] = []
    differentials: List[DifferentialEntry] = []

    @classmethod
    def from_groups(cls, groups: Dict[Tuple[int, int], FgAbGroup]) -> "BigradedTable":
        return cls(entries=[
            TableEntry(p=p, q=q, group=g)
            for (p, q), g in sorted(groups.items())
            if not g.is_zero()
        ])

    def as_dict(self) -> Dict[Tuple[int, int], FgAbGroup]:
        return {(e.p, e.q): e.group for e in self.entries if not e.group.is_zero()}

    def get(self, p: int, q: int) -> FgAbGroup:
        return self.as_dict().get((p, q), FgAbGroup.zero())

    def over(self, mode: CoefficientMode) -> "BigradedTable":
        return BigradedTable(
            entries=[
                TableEntry(p=e.p, q=e.q, group=e.group.over(mode))
                for e in self.entries
                if not e.group.over(mode).is_zero()
            ],
            differentials=[
                DifferentialEntry(
                    p=d.p, q=d.q,
                    image=d.image.over(mode), kernel=d.kernel.over(mode), cokernel=d.cokernel.over(mode),
                )
                for d in self.differentials
            ],
        )


class PageRecord(BaseModel):
    r: int
    table: BigradedTable


class CohomologyRow(BaseModel):
    degree: int
    group: FgAbGroup


class FiltrationRow(BaseModel):
    """L^p H^n и градуированный кусок Gr^p H^n"""
    p: int
    n: int
    level: FgAbGroup
    graded: FgAbGroup


# ==================== Verification reports ====================

class Mismatch(BaseModel):
    check: str
    location: Dict[str, int] = {}
    expected: str = ""
    actual: str = ""


class VerificationReport(BaseModel):
    """
    Отчёт о проверке: счётчик проверок и список расхождений

    passed = нет расхождений. Таблицы и строки кладутся в tables/rows
    для вывода в CLI.
    """
    name: str
    checks: int = 0
    mismatches: List[Mismatch] = []
    tables: Dict[str, BigradedTable] = {}
    cohomology: List[CohomologyRow] = []
    filtration: List[FiltrationRow] = []
    notes: List[str] = []

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.mismatches

    @property
    def first_mismatch(self) -> Optional[Mismatch]:
        return self.mismatches[0] if self.mismatches else None

    def expect(self, check: str, ok: bool, expected=None, actual=None, **location: int) -> bool:
        self.checks += 1
        if not ok:
            self.mismatches.append(Mismatch(
                check=check,
                location=location,
                expected=str(expected) if expected is not None else "",
                actual=str(actual) if actual is not None else "",
            ))
        return ok

    def expect_equal(self, check: str, expected, actual, **location: int) -> bool:
        return self.expect(check, expected == actual, expected, actual, **location)

    def merge(self, other: "VerificationReport", prefix: str = "") -> None:
        self.checks += other.checks
        for m in other.mismatches:
            self.mismatches.append(m.model_copy(update={"check": f"{prefix}{m.check}"}))


class ReportEnvelope(BaseModel):
    """Машиночитаемый вывод одной команды CLI"""
    command: str
    coefficients: CoefficientMode = CoefficientMode.INTEGERS
    status: str = "ok"
    cohomology: List[CohomologyRow] = []
    pages: List[PageRecord] = []
    reports: List[VerificationReport] = []
