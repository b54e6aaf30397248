import uvicorn

from wikg.core.config import settings
from wikg.core.logging import logger
from wikg.main import app
from wikg.schemas.commands import ServeArgs


def cmd_serve(args: ServeArgs) -> dict:
    """Run the inference API until interrupted."""
    if args.checkpoint:
        settings.checkpoint_path = args.checkpoint
    logger.info(f"Serving {settings.checkpoint_path or '(no checkpoint configured)'} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level=settings.log_level.lower())
    return {"host": args.host, "port": args.port}
