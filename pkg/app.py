# app.py
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, scoped_session, sessionmaker

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_SEED = 0
DEFAULT_LOG_LEVEL = 'WARNING'
DEFAULT_TOLERANCE = 1e-9
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

Base = declarative_base()


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    database_url: Optional[str] = None
    log_level: str = DEFAULT_LOG_LEVEL
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def ledger_enabled(self):
        return bool(self.database_url)


def load_settings(environ=None):
    """Build Settings from LIE_PLANNER_* environment variables"""
    environ = os.environ if environ is None else environ
    seed = environ.get('LIE_PLANNER_SEED', str(DEFAULT_SEED))
    tolerance = environ.get('LIE_PLANNER_TOLERANCE', str(DEFAULT_TOLERANCE))
    try:
        seed = int(seed)
        tolerance = float(tolerance)
    except ValueError as e:
        raise ValueError(f"Invalid planner setting in environment: {e}") from e
    return Settings(
        seed=seed,
        database_url=environ.get('LIE_PLANNER_DATABASE_URL') or environ.get('DATABASE_URL'),
        log_level=environ.get('LIE_PLANNER_LOG_LEVEL', DEFAULT_LOG_LEVEL).upper(),
        tolerance=tolerance,
    )


def configure_logging(level=DEFAULT_LOG_LEVEL):
    # stderr keeps JSON on stdout clean
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.WARNING),
                        format=LOG_FORMAT, stream=sys.stderr)


class Database:
    """Engine and session of the run ledger; inert until init() is called"""

    def __init__(self):
        self.engine = None
        self.session = None

    @property
    def enabled(self):
        return self.session is not None

    def init(self, url):
        # models must be imported so their tables are registered on Base
        import models  # noqa: F401

        self.close()
        self.engine = create_engine(url)
        self.session = scoped_session(sessionmaker(bind=self.engine))
        Base.metadata.create_all(self.engine)
        logger.info(f"Run ledger ready at {self.engine.url.render_as_string(hide_password=True)}")

    def close(self):
        if self.session is not None:
            self.session.remove()
        if self.engine is not None:
            self.engine.dispose()
        self.engine = None
        self.session = None


db = Database()
