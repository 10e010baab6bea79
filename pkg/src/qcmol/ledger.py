from typing import List, Optional
from datetime import datetime
from pathlib import Path
import json
import logging
from sqlalchemy.orm import declarative_base
from sqlalchemy import Column
from sqlalchemy import Integer
from sqlalchemy import Float
from sqlalchemy import String
from sqlalchemy import DateTime
from sqlalchemy import ForeignKey
from sqlalchemy import create_engine
from sqlalchemy.orm import Session
from sqlalchemy.orm import relationship

from .manifest import RunManifest

log = logging.getLogger(__name__)

Base = declarative_base()


class Run(Base):
    __tablename__ = "run"
    id = Column(Integer, primary_key=True)
    command = Column(String, nullable=False)
    argv = Column(String, nullable=False)
    version = Column(String, nullable=False)
    started = Column(DateTime, nullable=False)
    wall_clock = Column(Float, nullable=False)
    exit_code = Column(Integer, nullable=False)

    settings = relationship("Setting",
                            back_populates="run",
                            cascade="all, delete-orphan")
    outputs = relationship("Output",
                           back_populates="run",
                           cascade="all, delete-orphan")


class Setting(Base):
    __tablename__ = "setting"
    id = Column(Integer, primary_key=True)
    key = Column(String, nullable=False)
    value = Column(String, nullable=False)

    run_id = Column(Integer, ForeignKey("run.id"), nullable=False)
    run = relationship("Run", back_populates="settings")


class Output(Base):
    __tablename__ = "output"
    id = Column(Integer, primary_key=True)
    path = Column(String, nullable=False)

    run_id = Column(Integer, ForeignKey("run.id"), nullable=False)
    run = relationship("Run", back_populates="outputs")


class Ledger:

    def __init__(self, db: Path):
        self._db = db.absolute()
        self._db.parent.mkdir(exist_ok=True, parents=True)
        self._engine = create_engine(f"sqlite:///{self._db}")
        Base.metadata.create_all(self._engine)

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self._engine.dispose()

    @property
    def new_session(self):
        return Session(self._engine)

    def record(self, manifest: RunManifest) -> int:
        started = (datetime.fromisoformat(manifest.started)
                   if manifest.started else datetime.now())
        with self.new_session as session, session.begin():
            run = Run(command=manifest.command,
                      argv=json.dumps(manifest.argv),
                      version=manifest.version,
                      started=started,
                      wall_clock=manifest.wall_clock,
                      exit_code=manifest.exit_code)
            for key, value in sorted(manifest.settings.items()):
                run.settings.append(Setting(key=key, value=json.dumps(value)))
            for path in manifest.outputs:
                run.outputs.append(Output(path=path))
            session.add(run)
            session.flush()
            run_id = run.id
        log.debug("ledger: run %d (%s) recorded", run_id, manifest.command)
        return run_id

    def runs(self, command: Optional[str] = None) -> List[Run]:
        with self.new_session as session:
            q = session.query(Run)
            if command is not None:
                q = q.filter(Run.command == command)
            rv = q.order_by(Run.id).all()
            session.expunge_all()
            return rv

    def settings(self, run_id: int) -> dict:
        with self.new_session as session:
            return {s.key: json.loads(s.value)
                    for s in session.query(Setting).filter_by(run_id=run_id)}
