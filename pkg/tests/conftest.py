import os

import pytest

from authordisamb.corpus import load_corpus_dir
from authordisamb.synthgen import default_spec, generate_to_dir

from factories import SMALL_SPEC, corpus_from_spec


@pytest.fixture(autouse=True, scope="session")
def _private_cache(tmp_path_factory):
    # keep the parsed-corpus cache out of the user's home directory
    old = os.environ.get("AUTHORDISAMB_CACHE")
    os.environ["AUTHORDISAMB_CACHE"] = str(tmp_path_factory.mktemp("cache"))
    yield
    if old is None:
        os.environ.pop("AUTHORDISAMB_CACHE", None)
    else:
        os.environ["AUTHORDISAMB_CACHE"] = old


@pytest.fixture(scope="session")
def default_corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("default_corpus")
    generate_to_dir(default_spec(), out)
    return out


@pytest.fixture(scope="session")
def default_corpus(default_corpus_dir):
    return load_corpus_dir(default_corpus_dir, cache_dir=os.environ["AUTHORDISAMB_CACHE"])


@pytest.fixture(scope="session")
def small_corpus():
    return corpus_from_spec(**SMALL_SPEC)
