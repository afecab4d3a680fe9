"""HTTP service wrapping the inference engine.

Error mapping: malformed input 400, inconsistent evidence/model 422,
timeout 504, resource limit 507.
"""

from __future__ import annotations

import statistics

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..cover import predictors, solve_fractional_cover
from ..engine import EngineConfig, prepare, run_inference
from ..errors import (
    EngineError,
    InconsistentModelError,
    InferenceTimeoutError,
    ResourceLimitError,
    UaiFormatError,
)
from ..model import factor_sparsity
from ..oracle import induce_sparsity
from ..uai import parse_evidence, parse_uai, write_marginals, write_uai
from .schemas import (
    BagDiagnostics,
    BagStatsPayload,
    DiagnosticsRequest,
    DiagnosticsResponse,
    HealthResponse,
    InferenceRequest,
    InferenceResponse,
    SparsifyRequest,
    SparsifyResponse,
    StatsPayload,
    VariableMarginal,
)


def _parse_request_model(network: str, evidence: str | None):
    model = parse_uai(network)
    if evidence:
        model = model.with_evidence(parse_evidence(evidence, model.domain_sizes))
    return model


def create_app() -> FastAPI:
    app = FastAPI(title="ghdinfer", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/infer", response_model=InferenceResponse)
    def infer(request: InferenceRequest) -> InferenceResponse:
        try:
            model = _parse_request_model(request.network, request.evidence)
            config = EngineConfig(
                mode=request.mode,
                dense_table_cap=request.dense_table_cap,
                hybrid_beta=request.hybrid_beta,
                hybrid_sigma=request.hybrid_sigma,
                timeout_seconds=request.timeout_seconds,
                collect_stats=request.include_stats,
            )
            result = run_inference(model, config)
        except UaiFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except InferenceTimeoutError as exc:
            raise HTTPException(status_code=504, detail=str(exc)) from exc
        except ResourceLimitError as exc:
            raise HTTPException(status_code=507, detail=str(exc)) from exc
        except InconsistentModelError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except EngineError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        marginals = [
            VariableMarginal(variable=v, domain_size=len(dist), distribution=list(dist))
            for v, dist in enumerate(result.marginals.variable_marginals)
        ]
        stats = None
        if request.include_stats and result.stats is not None:
            s = result.stats
            stats = StatsPayload(
                treewidth=s.treewidth,
                bag_count=s.bag_count,
                log10_rho=s.log10_rho,
                fhtw=s.fhtw,
                log10_bound_sum_ratio=s.log10_bound_sum_ratio,
                log10_width_ratio=s.log10_width_ratio,
                strategy=list(s.strategy.assignment),
                agm_violations=list(s.agm_violations),
                calibration_gap=s.calibration_gap,
                seconds=s.seconds,
                bags=[
                    BagStatsPayload(
                        bag=b.bag,
                        chi_size=b.chi_size,
                        lambda_size=b.lambda_size,
                        strategy=b.strategy,
                        visited=b.visited,
                        work=b.work,
                        product_size=b.product_size,
                        message_size=b.message_size,
                        log2_bound=b.log2_bound,
                    )
                    for b in s.bags
                ],
            )
        return InferenceResponse(
            log_partition=result.marginals.log_partition,
            marginals=marginals,
            mar_text=write_marginals(result.marginals),
            stats=stats,
        )

    @app.post("/sparsify", response_model=SparsifyResponse)
    def sparsify(request: SparsifyRequest) -> SparsifyResponse:
        try:
            model = parse_uai(request.network)
            thinned = induce_sparsity(model, request.keep, request.seed)
        except UaiFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        levels = [
            100.0 * factor_sparsity(f, thinned.domain_sizes) for f in thinned.factors
        ]
        return SparsifyResponse(
            network=write_uai(thinned),
            median_sparsity=statistics.median(levels) if levels else 100.0,
            mean_sparsity=statistics.fmean(levels) if levels else 100.0,
        )

    @app.post("/diagnostics", response_model=DiagnosticsResponse)
    def diagnostics(request: DiagnosticsRequest) -> DiagnosticsResponse:
        try:
            model = _parse_request_model(request.network, request.evidence)
            plan = prepare(model)
            if plan.ghd is None:
                raise HTTPException(
                    status_code=422, detail="evidence fixes every variable"
                )
            pred = predictors(plan.ghd, plan.conditioned)
        except UaiFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except InconsistentModelError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        conditioned = plan.conditioned
        bags = []
        for b in plan.ghd.bags:
            edges = [
                (conditioned.factors[fid].scope, conditioned.factors[fid].size)
                for fid in b.alpha
            ]
            covered = {v for scope, _ in edges for v in scope}
            for v in sorted(set(b.chi) - covered):
                edges.append(((v,), conditioned.domain_sizes[v]))
            sol = solve_fractional_cover(b.chi, edges, bag=b.id)
            bags.append(
                BagDiagnostics(
                    bag=b.id,
                    chi=list(b.chi),
                    lambda_size=len(b.lambda_edges),
                    log2_bound=sol.log2_bound,
                    weights=list(sol.weights),
                )
            )
        return DiagnosticsResponse(
            variables=conditioned.num_variables,
            factors=conditioned.num_factors,
            bag_count=len(plan.ghd.bags),
            treewidth=plan.ghd.treewidth,
            fhtw=pred.fhtw,
            log10_rho=pred.log10_rho,
            log10_bound_sum_ratio=pred.log10_bound_sum_ratio,
            log10_width_ratio=pred.log10_width_ratio,
            bags=bags,
        )

    return app


app = create_app()
