import time

import pytest

from kwtrainer import TrainConfig, build_toy_corpus, load_word_clips, train


@pytest.fixture(scope="session")
def toy_corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_words")
    build_toy_corpus(str(root), n_words=10, clips_per_word=16, seed=1)
    return str(root)


@pytest.fixture(scope="session")
def toy_clips(toy_corpus_dir):
    return load_word_clips(toy_corpus_dir)


@pytest.fixture(scope="session")
def desk_run(toy_clips):
    """One full desk-scale training run shared by acceptance + integration."""
    start = time.monotonic()
    model, history = train(TrainConfig(epochs=4, seed=0), toy_clips)
    elapsed = time.monotonic() - start
    return {"model": model, "history": history, "elapsed": elapsed}
