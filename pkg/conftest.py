import math

import numpy as np
import pytest

from app import Settings, db
from services.algebra import Se2RVector, Se2Vector, So3Vector
from services.planning_service import PlanningService


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def s1_system():
    return (Se2Vector(1.0, 0.0, 0.5), Se2Vector(0.0, 1.0, 0.0))


@pytest.fixture
def s2_system():
    return (Se2Vector(1.0, 0.0, 0.5), Se2Vector(1.0, 1.0, 0.0))


@pytest.fixture
def so3_system():
    return (So3Vector(0.0, 0.0, 1.0), So3Vector(0.0, math.sqrt(0.5), math.sqrt(0.5)))


@pytest.fixture
def t1_system():
    return (Se2RVector(1.0, 1.0, 0.0, 0.5), Se2RVector(0.0, -2.0, 0.0, 1.0))


@pytest.fixture
def t2_system():
    return (Se2RVector(1.0, 0.2, -0.1, 0.3), Se2RVector(1.0, 1.0, 0.5, -0.7))


@pytest.fixture
def t3_system():
    return (Se2RVector(1.0, 0.5, -0.5, 0.2), Se2RVector(0.0, 1.0, 2.0, 0.0),
            Se2RVector(1.0, 0.5, -0.5, 1.5))


@pytest.fixture
def t4_system():
    return (Se2RVector(1.0, 0.3, 0.4, 0.5), Se2RVector(0.0, 1.5, -1.0, 0.0),
            Se2RVector(0.0, 0.0, 0.0, 1.0))


@pytest.fixture
def t5_system():
    return (Se2RVector(1.0, 0.0, 0.5, 0.4), Se2RVector(1.0, 1.0, 0.0, 0.4),
            Se2RVector(0.0, 0.0, 0.0, 1.0))


@pytest.fixture
def service():
    return PlanningService(Settings())


@pytest.fixture
def ledger(tmp_path):
    """Run ledger on a throwaway sqlite file"""
    db.init(f"sqlite:///{tmp_path / 'ledger.db'}")
    yield db
    db.close()
