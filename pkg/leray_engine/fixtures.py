"""
Классические клеточные модели для регрессии и демонстраций

Окружность из двух вершин и двух рёбер, RP^2 (6 вершин), сфера, расслоения
над окружностью с заданной монодромией (тор, бутылка Клейна, цилиндр,
лист Мёбиуса) и синтетический комплекс с ненулевым d_2.
"""

from typing import Dict, Tuple

from .cell_site import CellComplex, CellularSheaf, FilteredSpace, InvalidCellComplexError, Stalk
from .exact_algebra import int_matrix
from .filtered_complex import CochainComplex, Filtration
from .leray import CellularMap

# клетка -> (клетка, знак)
Monodromy = Dict[str, Tuple[str, int]]

CIRCLE_INCIDENCE = {("v0", "e0"): -1, ("v1", "e0"): 1, ("v1", "e1"): -1, ("v0", "e1"): 1}

RP2_FACETS = [
    (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
    (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3),
]


def interval() -> CellComplex:
    return CellComplex([("w0", 0), ("w1", 0), ("f", 1)], {("w0", "f"): -1, ("w1", "f"): 1})


def circle(prefix: str = "") -> CellComplex:
    """v0 --e0--> v1 --e1--> v0"""
    cells = [(f"{prefix}v0", 0), (f"{prefix}v1", 0), (f"{prefix}e0", 1), (f"{prefix}e1", 1)]
    return CellComplex(cells, {(f"{prefix}{s}", f"{prefix}{t}"): v for (s, t), v in CIRCLE_INCIDENCE.items()})


def fiber_circle() -> CellComplex:
    return CellComplex(
        [("w0", 0), ("w1", 0), ("f0", 1), ("f1", 1)],
        {("w0", "f0"): -1, ("w1", "f0"): 1, ("w1", "f1"): -1, ("w0", "f1"): 1},
    )


def twisted_circle_sheaf(X: CellComplex) -> CellularSheaf:
    """Локальная система ранга 1 с монодромией -1 (знак на конце v0 ребра e1)"""
    stalks = {c: Stalk.free(1) for c in X.cells}
    restrictions = {pair: int_matrix([[1]]) for pair in X.incidence}
    restrictions[("v0", "e1")] = int_matrix([[-1]])
    return CellularSheaf(X, stalks, restrictions)


def sphere() -> CellComplex:
    """Окружность и две 2-клетки D+ и D-"""
    cells = [("v0", 0), ("v1", 0), ("e0", 1), ("e1", 1), ("D+", 2), ("D-", 2)]
    incidence = dict(CIRCLE_INCIDENCE)
    for disk in ("D+", "D-"):
        incidence[("e0", disk)] = 1
        incidence[("e1", disk)] = 1
    return CellComplex(cells, incidence)


def sphere_two_level(X: CellComplex) -> FilteredSpace:
    """Вершины на уровне 0, остальное на уровне 1; не клеточна для Z"""
    return FilteredSpace(X, {c: 0 if X.dim_of[c] == 0 else 1 for c in X.cells})


def rp2() -> CellComplex:
    return CellComplex.from_simplices(RP2_FACETS)


def vertex_first(Y: CellComplex, vertex: str = "v0") -> FilteredSpace:
    """Y_0 = {vertex}, Y_1 = Y (для одномерной базы)"""
    return FilteredSpace(Y, {c: 0 if c == vertex else 1 for c in Y.cells})


# ==================== Bundles over the circle ====================

def circle_bundle(fiber: CellComplex, monodromy: Monodromy) -> Tuple[CellComplex, CellularMap]:
    """
    Расслоение над окружностью v0 --e0--> v1 --e1--> v0

    Клетки b*τ для клеток базы b и слоя τ. Произведение со знаками
    [σ×τ : σ'×τ] = [σ:σ'], [e×σ : e×τ] = -[σ:τ]; конец v0 ребра e1
    приклеен через монодромию: [v0×m(τ) : e1×τ] = ε_τ.
    """
    base = circle()
    for sigma, tau in fiber.incidence:
        (ms, es), (mt, et) = monodromy[sigma], monodromy[tau]
        if fiber.sign(ms, mt) * es * et != fiber.sign(sigma, tau):
            raise InvalidCellComplexError(
                f"Monodromy is not a cellular automorphism at [{sigma}:{tau}]", face=sigma, coface=tau
            )
    name = "{}*{}".format
    cells = []
    for b in base.cells:
        for t in fiber.cells:
            cells.append((name(b, t), base.dim_of[b] + fiber.dim_of[t]))
    incidence = {}
    for (s, t), v in fiber.incidence.items():
        for vert in ("v0", "v1"):
            incidence[(name(vert, s), name(vert, t))] = v
        for edge in ("e0", "e1"):
            incidence[(name(edge, s), name(edge, t))] = -v
    for t in fiber.cells:
        incidence[(name("v0", t), name("e0", t))] = -1
        incidence[(name("v1", t), name("e0", t))] = 1
        incidence[(name("v1", t), name("e1", t))] = -1
        image, sign = monodromy[t]
        incidence[(name("v0", image), name("e1", t))] = sign
    X = CellComplex(cells, incidence)
    projection = {name(b, t): b for b in base.cells for t in fiber.cells}
    return X, CellularMap(X, base, projection)


def _identity_monodromy(fiber: CellComplex) -> Monodromy:
    return {c: (c, 1) for c in fiber.cells}


def torus() -> Tuple[CellComplex, CellularMap]:
    fiber = fiber_circle()
    return circle_bundle(fiber, _identity_monodromy(fiber))


def klein_bottle() -> Tuple[CellComplex, CellularMap]:
    """Отражение слоя: вершины неподвижны, f0 <-> f1 со знаком -1"""
    monodromy = {"w0": ("w0", 1), "w1": ("w1", 1), "f0": ("f1", -1), "f1": ("f0", -1)}
    return circle_bundle(fiber_circle(), monodromy)


def cylinder() -> Tuple[CellComplex, CellularMap]:
    fiber = interval()
    return circle_bundle(fiber, _identity_monodromy(fiber))


def moebius_band() -> Tuple[CellComplex, CellularMap]:
    """Концы отрезка меняются местами, f -> -f"""
    monodromy = {"w0": ("w1", 1), "w1": ("w0", 1), "f": ("f", -1)}
    return circle_bundle(interval(), monodromy)


# ==================== Filtered complexes ====================

def d2_complex() -> Tuple[CochainComplex, Filtration]:
    """
    Z·a -> Z·b, d(a) = b; a на уровне 0, b на уровне 2

    E_1 = E_2 = {(0,0): Z, (2,-1): Z}, d_2 - изоморфизм, E_3 = 0.
    """
    K = CochainComplex.from_matrices(0, [1, 1], [[[1]]])
    return K, Filtration.basis_aligned(K, {0: [0], 1: [2]}, p_min=0, p_max=2)
