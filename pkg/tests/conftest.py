import csv

import pytest

from biasaudit.corpus import Corpus, TextSnippet
from biasaudit.stimuli import (default_entities_path, default_templates_path,
                               load_entities, load_templates)


def make_corpus(texts, platform="twitter", prefix="s"):
    snippets = [
        TextSnippet(id=f"{prefix}{i}", platform=platform, raw_text=t, clean_text=t)
        for i, t in enumerate(texts, start=1)
    ]
    return Corpus(snippets, provenance={"source": "test", "filters": []})


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture(scope="session")
def shipped_entities():
    return load_entities(default_entities_path())


@pytest.fixture(scope="session")
def shipped_templates():
    return load_templates(default_templates_path())
