"""Pydantic request and response models for the HTTP service."""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    config: str = Field(description="experiment config in the key=value text format")
    workers: int = 1


class MetricRow(BaseModel):
    snr_db: float
    ber: float
    ber_ci: float
    fer: float
    fer_ci: float
    trials: int
    nmse: Optional[float] = None
    ber_iter1: Optional[float] = None
    capped: bool = False


class JobStatus(BaseModel):
    job_id: str
    state: str                      # queued | running | done | failed
    kind: str
    error: Optional[str] = None
    records: Optional[List[MetricRow]] = None


class RateRow(BaseModel):
    snr_db: float
    rate_otfs: float
    rate_ofdm_nocp: float
    rate_ofdm_cp: float
    rate_ofdm_cp_mn: float


class RatesResponse(BaseModel):
    rows: List[RateRow]
    csv: str


class EstimateRow(BaseModel):
    snr_db: float
    nmse: float
    nmse_std: float
    trials: int


class EstimateResponse(BaseModel):
    rows: List[EstimateRow]
    csv: str


class SelftestCheck(BaseModel):
    name: str
    passed: bool
    detail: str


class SelftestResponse(BaseModel):
    passed: bool
    checks: List[SelftestCheck]


class HealthResponse(BaseModel):
    status: str
    version: str
