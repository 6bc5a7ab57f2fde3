from datetime import datetime
from sqlalchemy import Column, Integer, String, Float, DateTime
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class StationaryRun(Base):
    """Стационарный результат одного порядка разложения"""
    __tablename__ = 'stationary_runs'

    id = Column(Integer, primary_key=True)
    key = Column(String(64), unique=True, nullable=False, index=True)  # sha256 входных данных
    order = Column(String, nullable=False)  # ce1, ce2, ce3
    eta = Column(Float, nullable=False)
    total_spins = Column(Float, nullable=False)
    abs_a_sq = Column(Float, nullable=False)
    sz0 = Column(Float, nullable=True)
    outcome = Column(String, nullable=False)
    final_time = Column(Float, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<StationaryRun {self.order} N={self.total_spins} eta={self.eta:.6g}>"


class BoundaryRecord(Base):
    """Завершённая точка сетки N_sc (для продолжения длинных прогонов)"""
    __tablename__ = 'boundary_records'

    id = Column(Integer, primary_key=True)
    key = Column(String(64), unique=True, nullable=False, index=True)
    label = Column(String, nullable=False)  # c=14 или gamma_mhz=0.5
    eta_ratio = Column(Float, nullable=False)
    n_sc = Column(Float, nullable=True)
    d12 = Column(Float, nullable=True)
    d23 = Column(Float, nullable=True)
    d13 = Column(Float, nullable=True)
    status = Column(String, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f"<BoundaryRecord {self.label} ratio={self.eta_ratio} n_sc={self.n_sc}>"
