"""
Tests for reading and writing data bundles.
"""
import numpy as np
import pytest

from app.bundle import (
    DataBundle,
    bundle_from_network,
    load_bundle,
    read_key_values,
    read_matrix,
    save_bundle,
    write_key_values,
    write_matrix,
)
from models.network import GraphonSpec
from netmodel.formation import generate_world
from netmodel.sampling import egocentric_sample
from utils.errors import BundleError


def write_files(directory, files):
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


SIX_NODES = {
    "bundle.txt": "# six-node example\nnode_count=6\n",
    "edges.csv": "source,target\n0,1\n0,2\n0,3\n1,4\n1,5\n2,3\n",
    "sampled.csv": "node\n1\n0\n",
}


def test_six_node_bundle(tmp_path):
    bundle = load_bundle(write_files(tmp_path / "six", SIX_NODES))

    assert bundle.node_count == 6
    assert bundle.sampled.tolist() == [0, 1]
    assert bundle.rejected_edges == 1
    assert bundle.edges.shape == (5, 2)
    assert bundle.covariate_set().d_x == 0

    pn = bundle.partial_network()
    missing = ~pn.observed_mask
    np.fill_diagonal(missing, False)
    expected = np.zeros((6, 6), dtype=bool)
    expected[2:, 2:] = True
    np.fill_diagonal(expected, False)
    assert np.array_equal(missing, expected)
    assert pn.observed_adj[0].tolist() == [0, 1, 1, 1, 0, 0]


def test_round_trip(tmp_path):
    cov, _, prob, net = generate_world(25, GraphonSpec(), seed=2)
    pn = egocentric_sample(net, 10, seed=3)
    outcomes = np.random.default_rng(0).normal(size=25)
    bundle = bundle_from_network(net.adj, pn.sampled, cov.X, outcomes=outcomes, probabilities=prob.P)

    save_bundle(bundle, tmp_path / "b")
    loaded = load_bundle(tmp_path / "b")

    assert loaded.node_count == 25
    assert np.array_equal(loaded.edges, bundle.edges)
    assert np.array_equal(loaded.sampled, bundle.sampled)
    assert np.array_equal(loaded.covariates, cov.X)
    assert np.array_equal(loaded.outcomes, outcomes)
    assert np.array_equal(loaded.probabilities, prob.P)
    assert loaded.peer_covariates is None
    assert loaded.rejected_edges == 0
    assert np.array_equal(loaded.partial_network().observed_adj, pn.observed_adj)


def test_bundle_from_network_keeps_observable_links(toy_network):
    bundle = bundle_from_network(toy_network.adj, np.array([0, 1]), np.zeros((6, 0)))
    assert sorted(map(tuple, bundle.edges.tolist())) == [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)]


def test_non_numeric_edge_reports_its_line(tmp_path):
    files = dict(SIX_NODES, **{"edges.csv": "source,target\n0,1\n0,x\n"})
    with pytest.raises(BundleError) as info:
        load_bundle(write_files(tmp_path / "bad", files))
    assert info.value.line == 3
    assert info.value.path.endswith("edges.csv")
    assert ":3:" in str(info.value)


def test_duplicate_sampled_id_reports_its_line(tmp_path):
    files = dict(SIX_NODES, **{"sampled.csv": "node\n0\n1\n0\n"})
    with pytest.raises(BundleError) as info:
        load_bundle(write_files(tmp_path / "dup", files))
    assert info.value.line == 4


@pytest.mark.parametrize(
    "edges",
    [
        "source,target\n0,9\n",
        "source,target\n1,1\n",
        "source,target\n0,1.5\n",
        "from,to\n0,1\n",
    ],
)
def test_invalid_edges(tmp_path, edges):
    files = dict(SIX_NODES, **{"edges.csv": edges})
    with pytest.raises(BundleError):
        load_bundle(write_files(tmp_path / "edges", files))


def test_covariate_files(tmp_path):
    header_only = dict(SIX_NODES, **{"covariates.csv": "node\n"})
    assert load_bundle(write_files(tmp_path / "empty", header_only)).covariates.shape == (6, 0)

    rows = "".join(f"{k},{k / 10}\n" for k in reversed(range(6)))
    with_x = dict(SIX_NODES, **{"covariates.csv": "node,x1\n" + rows})
    loaded = load_bundle(write_files(tmp_path / "x", with_x))
    assert loaded.covariates[:, 0].tolist() == [k / 10 for k in range(6)]

    misnamed = dict(SIX_NODES, **{"covariates.csv": "node,age\n" + rows})
    with pytest.raises(BundleError):
        load_bundle(write_files(tmp_path / "misnamed", misnamed))

    short = dict(SIX_NODES, **{"covariates.csv": "node,x1\n0,0.5\n"})
    with pytest.raises(BundleError):
        load_bundle(write_files(tmp_path / "short", short))


def test_missing_required_file_is_an_io_error(tmp_path):
    files = {k: v for k, v in SIX_NODES.items() if k != "sampled.csv"}
    with pytest.raises(OSError):
        load_bundle(write_files(tmp_path / "nosample", files))


def test_key_values(tmp_path):
    path = tmp_path / "meta.txt"
    write_key_values(path, {"method": "x-ltwfe", "h": 0.1, "count": 3})
    assert read_key_values(path) == {"method": "x-ltwfe", "h": "0.10000000000000001", "count": "3"}

    path.write_text("# written by hand\n\nnode_count = 6\nlabel='six nodes'\n", encoding="utf-8")
    assert read_key_values(path) == {"node_count": "6", "label": "six nodes"}

    path.write_text("a=1\nnot a pair\n", encoding="utf-8")
    with pytest.raises(BundleError) as info:
        read_key_values(path)
    assert info.value.line == 2


@pytest.mark.parametrize(
    "text, line",
    [
        ("a=1\n\n\nflag\n", 4),
        ("# header\n=1\n", 2),
        ("a=1\nb=2\n\nc d\n", 4),
    ],
)
def test_key_values_errors_carry_the_line(tmp_path, text, line):
    path = tmp_path / "bundle.txt"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(BundleError) as info:
        read_key_values(path)
    assert info.value.line == line
    assert f"bundle.txt:{line}" in str(info.value)


def test_matrix_files(tmp_path):
    matrix = np.random.default_rng(1).uniform(size=(4, 4))
    write_matrix(tmp_path / "m.csv", matrix)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), matrix)

    mask = np.eye(3, dtype=bool)
    write_matrix(tmp_path / "mask.csv", mask)
    assert (tmp_path / "mask.csv").read_text().splitlines()[1] == "1,0,0"

    (tmp_path / "wide.csv").write_text("0,1,2\n1,2,3\n", encoding="utf-8")
    with pytest.raises(BundleError):
        read_matrix(tmp_path / "wide.csv")


def test_bundle_model_validation():
    with pytest.raises(ValueError):
        DataBundle(node_count=3, edges=[[0, 3]], sampled=[0], covariates=np.zeros((3, 0)))
    with pytest.raises(ValueError):
        DataBundle(node_count=3, edges=[], sampled=[0, 0], covariates=np.zeros((3, 0)))
    with pytest.raises(ValueError):
        DataBundle(node_count=3, edges=[], sampled=[0], covariates=np.zeros((2, 1)))
