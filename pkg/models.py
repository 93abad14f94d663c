from datetime import datetime

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from app import Base


class PlanRun(Base):
    """Model for logging planner invocations"""
    __tablename__ = 'plan_runs'

    id = Column(Integer, primary_key=True)
    command = Column(String(50), nullable=False)  # plan, fuzz, impossibility, ...
    group = Column(String(10))
    family = Column(String(20))
    fields = Column(JSON)
    target = Column(JSON)
    steps = Column(JSON)
    residual = Column(Float)
    success = Column(Boolean, default=False)
    duration_ms = Column(Integer)
    created_at = Column(DateTime, default=datetime.now)

    error_logs = relationship('ErrorLog', back_populates='run', cascade='all, delete-orphan')

    def __repr__(self):
        return f"<PlanRun {self.id}: {self.command} {self.family or '-'}>"


class ErrorLog(Base):
    """Model for logging planner errors"""
    __tablename__ = 'error_logs'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('plan_runs.id'), nullable=True)
    error_type = Column(String(50), nullable=False)
    error_message = Column(Text, nullable=False)
    error_details = Column(JSON)
    created_at = Column(DateTime, default=datetime.now)

    run = relationship('PlanRun', back_populates='error_logs')

    def __repr__(self):
        return f"<ErrorLog {self.id}: {self.error_type}>"
