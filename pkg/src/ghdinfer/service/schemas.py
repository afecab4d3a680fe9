"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Mode = Literal["multiway", "multiway01", "pairwise", "hybrid"]


class InferenceRequest(BaseModel):
    network: str = Field(description="UAI network text")
    evidence: str | None = Field(default=None, description="UAI evidence text")
    mode: Mode = "hybrid"
    include_stats: bool = False
    timeout_seconds: float | None = Field(default=None, ge=0)
    dense_table_cap: int = Field(default=2**31, ge=1)
    hybrid_beta: float = Field(default=1.0, gt=0)
    hybrid_sigma: float = Field(default=0.9, ge=0, le=1)


class VariableMarginal(BaseModel):
    variable: int
    domain_size: int
    distribution: list[float]


class BagStatsPayload(BaseModel):
    bag: int
    chi_size: int
    lambda_size: int
    strategy: int
    visited: int
    work: int
    product_size: int
    message_size: int
    log2_bound: float


class StatsPayload(BaseModel):
    treewidth: int
    bag_count: int
    log10_rho: float
    fhtw: float | None = None
    log10_bound_sum_ratio: float | None = None
    log10_width_ratio: float | None = None
    strategy: list[int]
    agm_violations: list[str]
    calibration_gap: float | None = None
    seconds: float
    bags: list[BagStatsPayload] = []


class InferenceResponse(BaseModel):
    log_partition: float
    marginals: list[VariableMarginal]
    mar_text: str
    stats: StatsPayload | None = None


class SparsifyRequest(BaseModel):
    network: str
    keep: float = Field(gt=0, le=1)
    seed: int = Field(ge=0)


class SparsifyResponse(BaseModel):
    network: str
    median_sparsity: float
    mean_sparsity: float


class DiagnosticsRequest(BaseModel):
    network: str
    evidence: str | None = None


class BagDiagnostics(BaseModel):
    bag: int
    chi: list[int]
    lambda_size: int
    log2_bound: float
    weights: list[float]


class DiagnosticsResponse(BaseModel):
    variables: int
    factors: int
    bag_count: int
    treewidth: int
    fhtw: float
    log10_rho: float
    log10_bound_sum_ratio: float
    log10_width_ratio: float
    bags: list[BagDiagnostics]


class HealthResponse(BaseModel):
    status: str
    version: str
