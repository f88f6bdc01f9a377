import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from utils.utils import load_json

logger = logging.getLogger(__name__)


class StageFailed(Exception):
    """Raised by a command body when a stage fails after its inputs were accepted."""


class PipelineCommand(BaseCommand):
    """Base for every toolkit command: global --seed/--threads/--config and exit-code mapping.

    Exit codes: 0 success, 1 invalid input, 2 stage failure.
    """

    config_serializer_class = None

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.add_argument("--seed", type=int, default=None, help="Master RNG seed.")
        parser.add_argument("--threads", type=int, default=None, help="Worker threads.")
        parser.add_argument("--config", type=Path, default=None, help="JSON document with parameter overrides.")
        return parser

    def handle(self, *args, **options):
        options["seed"] = settings.PIPELINE_SEED if options.get("seed") is None else options["seed"]
        options["threads"] = settings.PIPELINE_THREADS if options.get("threads") is None else options["threads"]
        try:
            options["overrides"] = self.load_overrides(options.get("config"))
            return self.run(**options)
        except CommandError:
            raise
        except serializers.ValidationError as exc:
            raise CommandError(f"Invalid input: {exc.detail}", returncode=1) from exc
        except (ValueError, FileNotFoundError) as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except StageFailed as exc:
            raise CommandError(str(exc), returncode=2) from exc
        except Exception as exc:
            logger.exception("%s failed", self.__class__.__module__.rsplit(".", 1)[-1])
            raise CommandError(f"Stage failed: {exc}", returncode=2) from exc

    def load_overrides(self, path):
        if path is None:
            return {}
        payload = load_json(path)
        if self.config_serializer_class is None:
            return payload
        serializer = self.config_serializer_class(data=payload)
        serializer.is_valid(raise_exception=True)
        return serializer.validated_data

    def run(self, **options):
        raise NotImplementedError

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
