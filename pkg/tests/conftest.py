import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import TOY_PB_TEXT, build_toy  # noqa: E402


@pytest.fixture
def toy():
    return build_toy()


@pytest.fixture
def toy_pb_text():
    return TOY_PB_TEXT


@pytest.fixture
def corpus_dir(tmp_path):
    """A small mixed corpus: two valid files (one nested) and one malformed."""
    root = tmp_path / "corpus"
    (root / "nested").mkdir(parents=True)
    (root / "a_toy.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
    (root / "nested" / "b_toy.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
    (root / "z_bad.pb").write_text("not a pb file\n", encoding="utf-8")
    return root
