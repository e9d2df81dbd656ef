"""
Pytest configuration and fixtures

Используется для всех тестов проекта.
"""

import os
import sys
from pathlib import Path

import pytest

# Корень репозитория в path, чтобы импортировать leray_engine без установки
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

# Настройки не должны подхватывать переменные окружения разработчика
for key in list(os.environ):
    if key.startswith("LERAY_"):
        del os.environ[key]

from leray_engine import fixtures as models
from leray_engine.cell_site import CellularSheaf
from leray_engine.config import get_settings

FIXTURES_DIR = ROOT / "fixtures"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture(autouse=True)
def fresh_settings():
    """Сбросить кэш настроек между тестами"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture
def klein():
    """Бутылка Клейна как расслоение над окружностью и постоянный пучок Z"""
    X, f = models.klein_bottle()
    return f, CellularSheaf.constant(X)


@pytest.fixture
def torus():
    X, f = models.torus()
    return f, CellularSheaf.constant(X)


@pytest.fixture
def d2_filtered():
    """Комплекс с ненулевым d_2"""
    return models.d2_complex()
