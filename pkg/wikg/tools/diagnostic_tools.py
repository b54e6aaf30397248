import json
from pathlib import Path

from wikg.schemas.commands import GradcheckArgs
from wikg.services.gradcheck_suite import run_gradcheck_suite


def cmd_gradcheck(args: GradcheckArgs) -> dict:
    """Per-op and full-model gradient checks in 64-bit precision."""
    reports = run_gradcheck_suite(args.op or None, tol=args.tol, eps=args.eps, seeds=args.seeds)
    failed = sorted({r.name for r in reports if not r.passed})
    result = {
        "passed": not failed,
        "n_checks": len(reports),
        "failed": failed,
        "worst": max(r.max_rel_error for r in reports),
        "reports": [r.model_dump() for r in reports],
    }
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result, indent=2), encoding="utf-8")
    return result
