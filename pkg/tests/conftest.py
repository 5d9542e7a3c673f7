import pytest

from slidesieve.synthetic import generate_base_tiles, generate_corpus


@pytest.fixture(scope="session")
def base_tiles(tmp_path_factory):
    tile_dir = tmp_path_factory.mktemp("tiles")
    generate_base_tiles(tile_dir, n=8, size=96, seed=11)
    return tile_dir


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, base_tiles):
    out = tmp_path_factory.mktemp("corpus")
    entries, labels = generate_corpus(base_tiles, out, n=60, seed=5)
    return out, entries, labels
