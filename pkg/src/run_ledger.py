"""Run ledger: SQLite history of completed sweeps."""
import uuid
from datetime import datetime
from typing import Dict, List, Optional

from sqlalchemy import Boolean, Column, DateTime, Float, Integer, JSON, String, create_engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker
from sqlalchemy.sql import func

from .refinement import SweepReport

Base = declarative_base()


class SweepRunRecord(Base):
    """Database model for one sweep run."""
    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, unique=True, index=True)
    oracle = Column(String, index=True)  # corpus model name, csv=path or ts=path:ij
    source = Column(String, index=True)  # "cli" or "api"
    f_min = Column(Float)
    f_max = Column(Float)
    dense_points = Column(Integer)
    n_parts = Column(Integer)
    threshold = Column(Float)
    solver_calls = Column(Integer)
    reduction_ratio = Column(Float)
    iterations = Column(Integer)
    global_error = Column(Float, nullable=True)  # NULL when undefined
    converged = Column(Boolean, index=True)
    saturated = Column(Boolean)
    details = Column(JSON)  # final per-part errors, sample counts per iteration
    timestamp = Column(DateTime, default=datetime.utcnow, index=True)


class RunLedger:
    """Records sweep runs for later comparison."""

    def __init__(self, db_path: str = "sweep_runs.db"):
        """Initialize run ledger.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self.engine = create_engine(f"sqlite:///{db_path}", connect_args={"check_same_thread": False})
        Base.metadata.create_all(bind=self.engine)
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)

    def record_run(self, report: SweepReport, oracle: str, source: str = "cli") -> str:
        """Store a finished sweep.

        Args:
            report: Sweep report to store
            oracle: Oracle spec the sweep ran against
            source: Surface that started the run

        Returns:
            Generated run ID
        """
        run_id = str(uuid.uuid4())
        config = report.config
        global_error = report.global_error if report.global_error != float("inf") else None
        db: Session = self.SessionLocal()
        try:
            record = SweepRunRecord(
                run_id=run_id,
                oracle=oracle,
                source=source,
                f_min=config.band.f_min,
                f_max=config.band.f_max,
                dense_points=config.dense_points,
                n_parts=config.n_parts,
                threshold=config.part_error_threshold,
                solver_calls=report.solver_calls,
                reduction_ratio=report.reduction_ratio,
                iterations=report.iterations,
                global_error=global_error,
                converged=report.converged,
                saturated=report.saturated,
                details={
                    "final_part_errors": [e if e != float("inf") else None for e in report.final_part_errors],
                    "sample_counts": list(report.sample_counts),
                    "edge_fallbacks": report.edge_fallbacks
                },
                timestamp=datetime.utcnow()
            )
            db.add(record)
            db.commit()
            return run_id
        finally:
            db.close()

    @staticmethod
    def _to_dict(record: SweepRunRecord) -> Dict:
        return {
            "run_id": record.run_id,
            "oracle": record.oracle,
            "source": record.source,
            "band": [record.f_min, record.f_max],
            "dense_points": record.dense_points,
            "n_parts": record.n_parts,
            "threshold": record.threshold,
            "solver_calls": record.solver_calls,
            "reduction_ratio": record.reduction_ratio,
            "iterations": record.iterations,
            "global_error": record.global_error,
            "converged": record.converged,
            "saturated": record.saturated,
            "details": record.details,
            "timestamp": record.timestamp.isoformat()
        }

    def get_runs(
        self,
        oracle: Optional[str] = None,
        converged: Optional[bool] = None,
        limit: int = 100,
        offset: int = 0
    ) -> List[Dict]:
        """Get recorded runs, newest first.

        Args:
            oracle: Filter by oracle spec
            converged: Filter by convergence flag
            limit: Maximum number of records
            offset: Offset for pagination

        Returns:
            List of run dictionaries
        """
        db: Session = self.SessionLocal()
        try:
            query = db.query(SweepRunRecord)
            if oracle:
                query = query.filter(SweepRunRecord.oracle == oracle)
            if converged is not None:
                query = query.filter(SweepRunRecord.converged == converged)
            records = query.order_by(SweepRunRecord.id.desc()).limit(limit).offset(offset).all()
            return [self._to_dict(r) for r in records]
        finally:
            db.close()

    def get_run(self, run_id: str) -> Optional[Dict]:
        """Get one run by ID, or None."""
        db: Session = self.SessionLocal()
        try:
            record = db.query(SweepRunRecord).filter(SweepRunRecord.run_id == run_id).first()
            return self._to_dict(record) if record else None
        finally:
            db.close()

    def get_stats(self) -> Dict:
        """Get ledger statistics.

        Returns:
            Totals, convergence rate, mean reduction ratio and runs per oracle
        """
        db: Session = self.SessionLocal()
        try:
            total = db.query(SweepRunRecord).count()
            converged = db.query(SweepRunRecord).filter(SweepRunRecord.converged.is_(True)).count()
            mean_ratio = db.query(func.avg(SweepRunRecord.reduction_ratio)).scalar()
            by_oracle = db.query(
                SweepRunRecord.oracle,
                func.count(SweepRunRecord.id).label('count')
            ).group_by(SweepRunRecord.oracle).all()
            return {
                "total_runs": total,
                "converged_runs": converged,
                "convergence_rate": converged / total if total else 0.0,
                "mean_reduction_ratio": float(mean_ratio) if mean_ratio is not None else None,
                "by_oracle": {row[0]: row[1] for row in by_oracle}
            }
        finally:
            db.close()
