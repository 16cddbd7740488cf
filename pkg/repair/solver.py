import asyncio
import logging
import re
import time
from typing import Literal

from pydantic import BaseModel, Field

from errors import SolverError

logger = logging.getLogger(__name__)

# Extra wall-clock time granted beyond the solver's own timeout before the process is killed.
KILL_GRACE_SECONDS = 30.0

_BOOL_DEFINITION = re.compile(r"\(define-fun\s+(\S+)\s+\(\)\s+Bool\s+(true|false)\)")


class SolverOutcome(BaseModel):
    status: Literal["sat", "unsat", "unknown"]
    model: dict[str, bool] = Field(default_factory=dict)
    seconds: float = 0.0

    @property
    def timed_out(self) -> bool:
        return self.status == "unknown"


def parse_model(text: str) -> dict[str, bool]:
    return {name: value == "true" for name, value in _BOOL_DEFINITION.findall(text)}


async def run_solver(solver: str, script: str, timeout_seconds: float, name: str = "bundle") -> SolverOutcome:
    """Feeds one SMT-LIB script to a fresh solver process and reads its verdict and model."""
    started = time.monotonic()
    try:
        process = await asyncio.create_subprocess_exec(
            solver,
            "-in",
            "-smt2",
            stdin=asyncio.subprocess.PIPE,
            stdout=asyncio.subprocess.PIPE,
            stderr=asyncio.subprocess.PIPE,
        )
    except OSError as e:
        raise SolverError(f"Could not start solver '{solver}': {e}")

    try:
        stdout, stderr = await asyncio.wait_for(
            process.communicate(script.encode("utf-8")), timeout=timeout_seconds + KILL_GRACE_SECONDS
        )
    except asyncio.TimeoutError:
        process.kill()
        await process.wait()
        raise SolverError(f"Solver did not answer on {name} within {timeout_seconds + KILL_GRACE_SECONDS:.0f}s.")

    text = stdout.decode("utf-8", errors="replace")
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    verdict = lines[0] if lines else ""
    if verdict not in ("sat", "unsat", "unknown"):
        detail = (stderr.decode("utf-8", errors="replace") or text)[:300]
        raise SolverError(f"Solver failed on {name} (exit {process.returncode}): {detail}")

    outcome = SolverOutcome(status=verdict, model=parse_model(text), seconds=time.monotonic() - started)
    logger.debug(f"Solver on {name}: {verdict} in {outcome.seconds:.2f}s, {len(outcome.model)} model entries.")
    return outcome
