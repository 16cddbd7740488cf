import json
import logging
import time
from pathlib import Path
from typing import Any, AsyncIterable, Optional

from genai_processors import processor
from genai_processors import streams
from genai_processors.content_api import ProcessorPart
from pydantic import BaseModel

import file_logic
from errors import InputError
from processors.centroid_deriver import CentroidDeriverProcessor, CentroidRepairerProcessor
from processors.corpus_synthesizer import CorpusSynthesizerProcessor
from processors.distance_calculator import DistanceCalculatorProcessor
from processors.graph_builder import GraphBuilderProcessor
from processors.mantel_tester import MantelTesterProcessor
from processors.stage import StageProcessor
from processors.subgraph_miner import SubgraphMinerProcessor
from schemas import RunManifest
from settings import TOOL_VERSION, PipelineConfig

logger = logging.getLogger(__name__)


class PipelineProcessor(processor.Processor):
    """Routes a request to the stage processor that owns its action."""

    def __init__(self, stages: Optional[list[StageProcessor]] = None):
        self.stages = stages or [
            GraphBuilderProcessor(),
            DistanceCalculatorProcessor(),
            CentroidDeriverProcessor(),
            CentroidRepairerProcessor(),
            CorpusSynthesizerProcessor(),
            MantelTesterProcessor(),
            SubgraphMinerProcessor(),
        ]
        self.routes = {action: stage for stage in self.stages for action in stage.actions}

    async def call(self, input_stream: AsyncIterable[ProcessorPart]) -> AsyncIterable[ProcessorPart]:
        input_json = ""
        async for part in input_stream:
            if part.text:
                input_json += part.text

        try:
            input_data = json.loads(input_json)
            action = input_data.get("action")
            stage = self.routes.get(action)
            if stage is None:
                yield ProcessorPart(json.dumps(InputError(f"Invalid action specified: {action}.", stage="pipeline").to_dict()))
                return
            chain_input_stream = streams.stream_content([ProcessorPart(json.dumps(input_data))])
            async for part in stage(chain_input_stream):
                yield part
        except (json.JSONDecodeError, AttributeError) as e:
            logger.error(f"Error routing pipeline request: {e}")
            yield ProcessorPart(json.dumps(InputError("Invalid input format for pipeline processor.", stage="pipeline").to_dict()))


class PipelineOutcome(BaseModel):
    result: dict[str, Any]
    manifest: RunManifest
    exit_code: int = 0


def _input_files(config: PipelineConfig) -> list[Path]:
    paths = [path for path in config.inputs if path.exists()]
    if config.centroid is not None and config.centroid.exists():
        paths.append(config.centroid)
    files = []
    for path in paths:
        files.extend(file_logic.corpus_files([path]) if path.is_dir() else [path])
    return files


async def run_pipeline(
    pipeline: PipelineProcessor,
    config: PipelineConfig,
    argv: Optional[list[str]] = None,
) -> PipelineOutcome:
    """Runs config.pipeline end to end and writes manifest.json into config.out."""
    started_at = file_logic.now_iso()
    started = time.monotonic()
    config.out.mkdir(parents=True, exist_ok=True)
    request = {"action": config.pipeline, "config": json.loads(config.model_dump_json())}

    response_json = ""
    async for part in pipeline(streams.stream_content([ProcessorPart(json.dumps(request))])):
        if part.text:
            response_json += part.text
    result = json.loads(response_json)

    outputs = [Path(path) for path in result.get("outputs", {}).values()]
    manifest = RunManifest(
        command=config.pipeline,
        argv=argv or [],
        config=request["config"],
        seeds={"seed": config.seed},
        inputs=file_logic.digests(_input_files(config)),
        outputs=file_logic.digests([path for path in outputs if path.is_file()], root=config.out),
        tool_version=TOOL_VERSION,
        started_at=started_at,
        wall_clock_seconds=round(time.monotonic() - started, 3),
        status="error" if "error" in result else "ok",
        error=result.get("error"),
    )
    file_logic.write_manifest(config.out, manifest)
    return PipelineOutcome(result=result, manifest=manifest, exit_code=int(result.get("exit_code", 0)))


async def replay(pipeline: PipelineProcessor, manifest_path: Path, out: Path) -> dict[str, Any]:
    """Re-runs a manifest's command into out and compares output digests."""
    manifest = file_logic.read_manifest(manifest_path)
    config = PipelineConfig.model_validate({**manifest.config, "out": str(out)})
    outcome = await run_pipeline(pipeline, config, ["replay", str(manifest_path)])
    mismatched = sorted(
        name for name, digest in manifest.outputs.items() if outcome.manifest.outputs.get(name) != digest
    )
    if mismatched:
        logger.warning(f"Replay differs from {manifest_path} in {mismatched}")
    else:
        logger.info(f"Replay reproduced all {len(manifest.outputs)} outputs of {manifest_path}.")
    return {"reproduced": not mismatched and outcome.exit_code == 0, "mismatched": mismatched, "exit_code": outcome.exit_code}
