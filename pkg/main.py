"""Main entry point for the FastAPI app."""

from fastapi import FastAPI
from starlette.middleware.gzip import GZipMiddleware

from consensus_dkf import router
from consensus_dkf.config import settings

app = FastAPI(title="consensus-dkf")
app.add_middleware(GZipMiddleware)
app.include_router(router, prefix=settings.dkf_router_prefix)
