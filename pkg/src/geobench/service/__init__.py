from .app import create_app
from .models import (
    ClassifyRequest,
    ClassifyResponse,
    CostRequest,
    CostResponse,
    GenerateRequest,
    GenerateResponse,
    RunRequest,
)
from .ops import op_classify, op_cost, op_generate, op_run

__all__ = [
    "create_app",
    "GenerateRequest",
    "GenerateResponse",
    "ClassifyRequest",
    "ClassifyResponse",
    "CostRequest",
    "CostResponse",
    "RunRequest",
    "op_generate",
    "op_classify",
    "op_cost",
    "op_run",
]
