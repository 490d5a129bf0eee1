"""
Database Models for the verification run ledger
Write-only archive of run reports; nothing is read back during a run
"""
import json
import logging
from datetime import datetime

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from utils import json_safe

logger = logging.getLogger(__name__)

Base = declarative_base()


class Run(Base):
    """One scenario execution"""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    scenario_name = Column(String(200), nullable=False)
    model = Column(String(50))
    density = Column(String(50))
    seed = Column(Integer)
    tool_version = Column(String(20))
    schema_version = Column(Integer)
    passed = Column(Boolean, default=False)
    wall_ms = Column(Float)
    numeric_failure = Column(Text)
    scenario_echo = Column(Text)  # JSON
    created_date = Column(DateTime, default=datetime.now)

    # Relationships
    checks = relationship("CheckResult", back_populates="run", cascade="all, delete-orphan")
    solver_results = relationship("SolverResult", back_populates="run", cascade="all, delete-orphan")


class CheckResult(Base):
    """One check row of a run"""
    __tablename__ = 'check_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'))
    identity_id = Column(String(50), nullable=False)
    position = Column(Integer)  # catalog order within the run
    sup_residual = Column(Float)
    mean_residual = Column(Float)
    tolerance = Column(Float)
    convergence_order = Column(Float)
    masked_fraction = Column(Float)
    hypothesis_ok = Column(Boolean)
    passed = Column(Boolean)
    message = Column(Text)
    diagnostics = Column(Text)  # JSON

    # Relationships
    run = relationship("Run", back_populates="checks")


class SolverResult(Base):
    """Solver outcome of a run"""
    __tablename__ = 'solver_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'))
    task = Column(String(20))
    basis = Column(String(50))
    kernel_dim = Column(Integer)
    min_singular_value = Column(Float)
    eigenvalues = Column(Text)  # JSON
    passed = Column(Boolean)
    payload = Column(Text)  # JSON

    # Relationships
    run = relationship("Run", back_populates="solver_results")


def _finite(value):
    return json_safe(value) if value is not None else None


def _json(value) -> str:
    return json.dumps(json_safe(value), sort_keys=True)


def record_run(session, report) -> Run:
    """Archive a RunReport with its check rows and solver outcome"""
    scenario = report.scenario
    run = Run(
        scenario_name=scenario.get('name') or 'unnamed',
        model=scenario.get('model', {}).get('name'),
        density=scenario.get('density', {}).get('preset'),
        seed=scenario.get('seed'),
        tool_version=report.version,
        schema_version=report.to_dict()['schema_version'],
        passed=report.passed,
        wall_ms=report.wall_ms,
        numeric_failure=report.numeric_failure,
        scenario_echo=_json(scenario),
    )
    for position, c in enumerate(report.checks):
        run.checks.append(CheckResult(
            identity_id=c.identity_id,
            position=position,
            sup_residual=_finite(c.sup_residual),
            mean_residual=_finite(c.mean_residual),
            tolerance=_finite(c.tolerance),
            convergence_order=_finite(c.convergence_order),
            masked_fraction=_finite(c.masked_fraction),
            hypothesis_ok=c.hypothesis_ok,
            passed=c.passed,
            message=c.message,
            diagnostics=_json(c.diagnostics),
        ))
    if report.solver is not None:
        solver = report.solver
        run.solver_results.append(SolverResult(
            task=solver.get('task'),
            basis=solver.get('basis'),
            kernel_dim=solver.get('kernel_dim'),
            min_singular_value=_finite(solver.get('min_singular_value')),
            eigenvalues=_json(solver.get('eigenvalues')),
            passed=bool(solver.get('pass', True)),
            payload=_json(solver),
        ))
    session.add(run)
    session.commit()
    logger.info(f"Recorded run {run.id} of '{run.scenario_name}' in the ledger")
    return run


# Database initialization
def init_database(db_path='sqlite:///data/verification_ledger.db'):
    """Initialize the database"""
    if '://' not in db_path:
        db_path = f'sqlite:///{db_path}'
    engine = create_engine(db_path, echo=False)
    Base.metadata.create_all(engine)
    return engine


def get_session(engine):
    """Get database session"""
    Session = sessionmaker(bind=engine)
    return Session()
