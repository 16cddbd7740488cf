# context.py
from processors.pipeline.pipeline_processor import PipelineProcessor
from settings import Settings

# Runtime state shared by the CLI
settings: Settings | None = None
pipeline_processor: PipelineProcessor | None = None
