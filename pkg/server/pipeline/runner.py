import logging
import time

from django.conf import settings

from pipeline.exceptions import StageError
from pipeline.manifest import Manifest
from pipeline.stages import STAGES, RunContext

logger = logging.getLogger(__name__)


def run_pipeline(cfg):
    """Run the configured stages in order and return the manifest.

    A stage is skipped when the previous manifest shows identical inputs, parameters and outputs.
    The first failing stage stops the run; its manifest entry is written before StageError is raised.
    """
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg)
    manifest = Manifest.open(cfg.out_dir / settings.PIPELINE["MANIFEST_NAME"], cfg.config_hash, cfg.seed)

    for name in cfg.stages:
        stage = STAGES[name]
        seed = ctx.seed(name)
        params = stage.params(ctx)
        inputs = stage.inputs(ctx)
        if manifest.cached(name, inputs, params, stage.outputs(ctx)):
            logger.info("Stage %s: cached", name)
            manifest.record(name, "cached", inputs, params, stage.outputs(ctx), 0.0, seed=seed)
            continue

        logger.info("Stage %s: running", name)
        started = time.perf_counter()
        try:
            stage.run(ctx)
        except Exception as exc:
            seconds = time.perf_counter() - started
            manifest.record(name, "failed", inputs, params, stage.outputs(ctx), seconds, seed=seed, error=str(exc))
            logger.error("Stage %s failed after %.1fs: %s", name, seconds, exc)
            raise StageError(name, str(exc)) from exc
        seconds = time.perf_counter() - started
        manifest.record(name, "ran", inputs, params, stage.outputs(ctx), seconds, seed=seed)
        logger.info("Stage %s: done in %.1fs", name, seconds)

    return manifest.to_dict()
