import asyncio
import json

from genai_processors import streams
from genai_processors.content_api import ProcessorPart

import file_logic
from processors.pipeline.pipeline_processor import PipelineProcessor, replay, run_pipeline
from settings import PipelineConfig


def _route(request: dict) -> dict:
    async def collect():
        text = ""
        async for part in PipelineProcessor()(streams.stream_content([ProcessorPart(json.dumps(request))])):
            text += part.text or ""
        return json.loads(text)

    return asyncio.run(collect())


class TestRouting:
    def test_every_action_has_a_stage(self):
        pipeline = PipelineProcessor()
        assert set(pipeline.routes) == {
            "ingest",
            "validate",
            "augment",
            "compress",
            "distance",
            "distance-matrix",
            "ablation",
            "centroid",
            "repair",
            "synth",
            "dist-error",
            "centroid-error",
            "mantel",
            "mine",
        }

    def test_unknown_action(self):
        result = _route({"action": "nope"})
        assert result["stage"] == "pipeline"
        assert result["exit_code"] == 3

    def test_routes_to_stage(self, toy_files, tmp_path):
        result = _route({"action": "validate", "config": {"inputs": [str(toy_files[0])], "out": str(tmp_path)}})
        assert result["stage"] == "validate"
        assert result["summary"]["valid"]


class TestRunPipeline:
    def test_manifest(self, toy_files, tmp_path):
        config = PipelineConfig(pipeline="ingest", inputs=toy_files[:1], out=tmp_path / "run", seed=4)
        outcome = asyncio.run(run_pipeline(PipelineProcessor(), config, ["ingest", str(toy_files[0])]))
        assert outcome.exit_code == 0
        manifest = file_logic.read_manifest(tmp_path / "run")
        assert manifest.command == "ingest"
        assert manifest.status == "ok"
        assert manifest.seeds == {"seed": 4}
        assert set(manifest.outputs) == {"graph.json", "graph.dot"}
        assert list(manifest.inputs) == [str(toy_files[0])]

    def test_failure_is_recorded(self, tmp_path):
        config = PipelineConfig(pipeline="ingest", inputs=[tmp_path / "absent.json"], out=tmp_path / "run")
        outcome = asyncio.run(run_pipeline(PipelineProcessor(), config))
        assert outcome.exit_code == 3
        assert outcome.manifest.status == "error"
        assert outcome.manifest.outputs == {}

    def test_replay_reproduces(self, toy_files, tmp_path):
        config = PipelineConfig(pipeline="distance", inputs=toy_files[:2], out=tmp_path / "run", exhaustive=True)
        asyncio.run(run_pipeline(PipelineProcessor(), config))
        report = asyncio.run(replay(PipelineProcessor(), tmp_path / "run" / "manifest.json", tmp_path / "again"))
        assert report == {"reproduced": True, "mismatched": [], "exit_code": 0}
