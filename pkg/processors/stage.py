import asyncio
import json
import logging
from pathlib import Path
from typing import Any, AsyncIterable

from genai_processors import processor
from genai_processors.content_api import ProcessorPart
from pydantic import ValidationError

from errors import ConfigError, InputError, InternalError, StgError
from graph.model import LevelKind
from settings import PipelineConfig

logger = logging.getLogger(__name__)


class StageProcessor(processor.Processor):
    """Base for pipeline stages.

    Reads one JSON request ({"action", "config", ...}) from the text parts, runs the
    stage off the event loop and yields one JSON part: the stage result, or
    {"error", "stage", "exit_code"} on failure.
    """

    name = "stage"
    actions: tuple[str, ...] = ()

    def run(self, action: str, config: PipelineConfig, request: dict[str, Any]) -> dict[str, Any]:
        raise NotImplementedError

    async def call(self, input_stream: AsyncIterable[ProcessorPart]) -> AsyncIterable[ProcessorPart]:
        input_json = ""
        async for part in input_stream:
            if part.text:
                input_json += part.text

        try:
            request = json.loads(input_json)
            action = request.get("action", self.name)
            if action not in self.actions:
                raise InputError(f"{type(self).__name__} cannot run action '{action}'.", stage=self.name)
            try:
                config = PipelineConfig.model_validate(request.get("config", {}))
            except ValidationError as e:
                raise ConfigError(f"Invalid pipeline configuration: {e}")
            config.out.mkdir(parents=True, exist_ok=True)
            logger.info("=" * 20 + f" Stage {action} " + "=" * 20)
            result = await asyncio.to_thread(self.run, action, config, request)
            result.setdefault("stage", action)
            yield ProcessorPart(json.dumps(result))
        except StgError as e:
            logger.error(f"Stage {self.name} failed: {e}")
            yield ProcessorPart(json.dumps(e.to_dict()))
        except json.JSONDecodeError as e:
            logger.error(f"Invalid request for {self.name}: {e}")
            yield ProcessorPart(json.dumps(InputError(f"Invalid request: {e}", stage=self.name).to_dict()))
        except Exception as e:
            logger.critical(f"Unexpected failure in {self.name}: {e}", exc_info=True)
            yield ProcessorPart(json.dumps(InternalError(str(e), stage=self.name).to_dict()))

    async def run_request(self, request: dict[str, Any]) -> dict[str, Any]:
        result_parts = await processor.apply_async(self, [ProcessorPart(json.dumps(request, default=str))])
        return json.loads("".join(part.text for part in result_parts if part.text))


def inputs_of(config: PipelineConfig, count: int | None = None) -> list[Path]:
    """Configured inputs, checked for existence and, when given, their number."""
    missing = [str(path) for path in config.inputs if not path.exists()]
    if missing:
        raise InputError(f"Missing inputs: {missing}")
    if count is not None and len(config.inputs) != count:
        raise InputError(f"Expected {count} inputs, got {len(config.inputs)}.")
    return list(config.inputs)


def level_filter(config: PipelineConfig) -> list[LevelKind] | None:
    if config.levels is None:
        return None
    try:
        return [LevelKind(name) for name in config.levels]
    except ValueError as e:
        raise InputError(f"Unknown level in {config.levels}: {e}", stage="ingest")
