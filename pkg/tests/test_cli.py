"""
End-to-end tests for the command-line interface.
"""
import numpy as np
import pytest

from app.bundle import load_bundle, read_key_values, read_matrix
from app.cli import EXIT_INVALID, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, build_parser, main
from models.network import GraphonSpec
from netmodel.formation import generate_world
from netmodel.sampling import egocentric_sample
from utils.random import derive_seed


@pytest.fixture
def simulated_bundle(tmp_path):
    out = tmp_path / "bundle"
    code = main(["simulate", "--nodes", "30", "--phi", "0.4", "--seed", "5", "--out", str(out)])
    assert code == EXIT_OK
    return out


def test_simulate_writes_the_seeded_world(simulated_bundle):
    bundle = load_bundle(simulated_bundle)

    cov, _, prob, net = generate_world(30, GraphonSpec(beta=[-0.5, -0.5]), derive_seed(5, "simulate", 0))
    pn = egocentric_sample(net, 12, derive_seed(5, "simulate-sample", 0))

    assert np.array_equal(bundle.sampled, pn.sampled)
    assert np.array_equal(bundle.covariates, cov.X)
    assert np.array_equal(bundle.probabilities, prob.P)
    assert np.array_equal(bundle.partial_network().observed_adj, pn.observed_adj)
    assert bundle.outcomes is None


def test_impute_writes_outputs_deterministically(simulated_bundle, tmp_path):
    args = ["impute", str(simulated_bundle), "--method", "x-ltwfe", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK

    imputed = read_matrix(tmp_path / "a" / "imputed.csv")
    provenance = read_matrix(tmp_path / "a" / "provenance.csv")
    assert np.array_equal(imputed, imputed.T)
    assert imputed.min() >= 0.0 and imputed.max() <= 1.0
    assert set(np.unique(provenance)) <= {0.0, 1.0}

    metadata = read_key_values(tmp_path / "a" / "metadata.txt")
    assert metadata["method"] == "x-ltwfe"
    assert metadata["imputed_pairs"] == str(18 * 17 // 2)
    assert float(metadata["rmse_missing_block"]) >= 0.0
    assert "h_star" in metadata

    for name in ("imputed.csv", "provenance.csv", "metadata.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def write_bundle(directory, node_count, edges, sampled, outcomes=None):
    directory.mkdir(parents=True)
    (directory / "bundle.txt").write_text(f"node_count={node_count}\n")
    (directory / "edges.csv").write_text("source,target\n" + "".join(f"{i},{j}\n" for i, j in edges))
    (directory / "sampled.csv").write_text("node\n" + "".join(f"{k}\n" for k in sampled))
    if outcomes is not None:
        (directory / "outcomes.csv").write_text("node,y\n" + "".join(f"{k},{y}\n" for k, y in enumerate(outcomes)))
    return directory


def test_covariate_method_without_covariates_is_invalid(tmp_path):
    bundle = write_bundle(tmp_path / "b", 6, [(0, 1), (0, 2), (1, 3)], [0, 1])
    assert main(["impute", str(bundle), "--method", "x", "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_missing_bundle_is_an_io_error(tmp_path):
    assert main(["impute", str(tmp_path / "absent"), "--out", str(tmp_path / "o")]) == EXIT_IO


def test_constant_centrality_is_a_numerical_failure(tmp_path):
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    bundle = write_bundle(tmp_path / "b", 4, edges, [0, 1, 2], outcomes=[1.0, 2.0, 3.0, 4.0])
    args = ["estimate", str(bundle), "--method", "sampled", "--model", "centrality-degree"]
    assert main(args + ["--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_estimate_with_undersmoothing_sweep(tmp_path, capsys):
    sim = tmp_path / "sim"
    code = main(
        [
            "simulate",
            "--nodes", "30",
            "--phi", "0.5",
            "--bundles", "3",
            "--outcomes", "centrality-degree",
            "--seed", "2",
            "--out", str(sim),
        ]
    )
    assert code == EXIT_OK
    bundles = sorted(str(p) for p in sim.iterdir())
    assert len(bundles) == 3

    args = ["estimate", *bundles, "--method", "ltwfe", "--model", "centrality-degree"]
    assert main(args + ["--undersmooth-sweep", "1,0.8", "--out", str(tmp_path / "est")]) == EXIT_OK

    estimate = read_key_values(tmp_path / "est" / "estimate.txt")
    assert estimate["n_networks"] == "3"
    for prefix in ("u1.", "u0.8."):
        assert f"{prefix}alpha_1" in estimate
        assert f"{prefix}se_alpha_1" in estimate
    assert "u1.alpha_1=" in capsys.readouterr().out


def test_mc_report_is_deterministic(tmp_path):
    args = [
        "mc",
        "--experiment", "imputation",
        "--replications", "2",
        "--nodes", "30",
        "--phi", "0.4",
        "--methods", "x,sampled",
        "--seed", "3",
    ]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--threads", "2", "--out", str(tmp_path / "b")]) == EXIT_OK

    report = (tmp_path / "a" / "report.csv").read_text()
    assert report.splitlines()[0].startswith("method,phi,replications,rmse")
    assert report == (tmp_path / "b" / "report.csv").read_text()
    metadata = read_key_values(tmp_path / "a" / "metadata.txt")
    assert metadata["methods"] == "x,sampled"
    assert metadata["phi_list"] == "0.4"


def test_config_file_and_flags(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("method=sampled\nseed=4\n")
    bundle = write_bundle(tmp_path / "b", 6, [(0, 1), (0, 2), (1, 3)], [0, 1])

    assert main(["impute", str(bundle), "--config", str(config), "--out", str(tmp_path / "o")]) == EXIT_OK
    metadata = read_key_values(tmp_path / "o" / "metadata.txt")
    assert metadata["method"] == "sampled"
    assert metadata["seed"] == "4"

    config.write_text("bandwith=0.1\n")
    assert main(["impute", str(bundle), "--config", str(config), "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_no_subcommand_prints_help(capsys):
    assert main([]) == EXIT_INVALID
    assert "simulate" in capsys.readouterr().out


def test_parser_rejects_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["impute", "b", "--method", "knn"])
