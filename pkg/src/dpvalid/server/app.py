"""Thin HTTP skin over :class:`ValidationService`.

Every error leaves as a structured body ``{"code", "message"}`` (budget
rejections add ``"remaining"``), with the HTTP status derived from the
error code. Endpoints are synchronous on purpose: query execution is
numpy-bound, and the framework's worker threads give the concurrency the
accountant is built to withstand.
"""

from __future__ import annotations

from fastapi import Body, Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..errors import BudgetExceededError, DpvalidError
from .config import ServerConfig
from .service import DatasetRegistration, ValidationService

_STATUS_FOR_CODE = {
    "malformed-request": 400,
    "invalid-parameter": 400,
    "calibration-unsupported": 400,
    "unauthorized": 401,
    "budget-exceeded": 403,
    "not-found": 404,
    "insufficient-data": 422,
    "degenerate-fit": 422,
}


class _AuthError(Exception):
    pass


def _error_body(exc: DpvalidError) -> dict:
    body = {"code": exc.code, "message": str(exc)}
    if isinstance(exc, BudgetExceededError):
        body["remaining"] = {
            "epsilon": exc.remaining_epsilon,
            "delta": exc.remaining_delta,
        }
    return body


def build_app(config: ServerConfig) -> FastAPI:
    service = ValidationService(config)
    app = FastAPI(title="dpvalid validation server", version="0.1.0")
    app.state.service = service

    def check_token(request: Request) -> None:
        if config.api_token is None:
            return
        if request.headers.get("x-api-token") != config.api_token:
            raise _AuthError

    guarded = [Depends(check_token)]

    @app.exception_handler(DpvalidError)
    async def on_dpvalid_error(request: Request, exc: DpvalidError):
        status = _STATUS_FOR_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content=_error_body(exc))

    @app.exception_handler(_AuthError)
    async def on_auth_error(request: Request, exc: _AuthError):
        return JSONResponse(
            status_code=401,
            content={"code": "unauthorized", "message": "missing or wrong X-Api-Token header"},
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "malformed-request", "message": str(exc)},
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "datasets": service.dataset_ids()}

    @app.post("/datasets", status_code=201, dependencies=guarded)
    def register(payload: dict = Body(...)) -> dict:
        reg = DatasetRegistration.from_json(payload, config.default_min_subset_size)
        return service.register_dataset(reg)

    @app.post("/datasets/{dataset_id}/queries", dependencies=guarded)
    def query(dataset_id: str, payload: dict = Body(...)) -> dict:
        return service.handle_query(dataset_id, payload)

    @app.post("/datasets/{dataset_id}/preview", dependencies=guarded)
    def preview(dataset_id: str, payload: dict = Body(...)) -> dict:
        return service.preview(dataset_id, payload)

    @app.get("/datasets/{dataset_id}/budget", dependencies=guarded)
    def budget(dataset_id: str) -> dict:
        return service.get_budget(dataset_id)

    return app
