"""Run the service: `nli-service` or `python -m nli_service`.

PORT and MODEL_ID env vars configure the listener and the checkpoint
(MODEL_ID defaults to the dependency-free builtin:overlap model; point it
at an MNLI checkpoint such as facebook/bart-large-mnli for real scoring).
"""
import os

import uvicorn

from .app import create_app


def main():
    port = int(os.environ.get("PORT", "8691"))
    uvicorn.run(create_app(), host="0.0.0.0", port=port, log_level="info")


if __name__ == "__main__":
    main()
