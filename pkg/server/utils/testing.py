import tempfile
from pathlib import Path


class TmpDirMixin:
    """Per-test scratch directory at self.tmp."""

    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()
