import math

import numpy as np
import pandas as pd
import pytest
import yaml
from numpy.testing import assert_allclose
from typer.testing import CliRunner

from cli.RunConfig import RunConfig
from cli.cliutils import exact_taylor_coefficients, parse_function, parse_grid
from cli.csvutils import metadata_path, read_koopman, read_snapshots, write_koopman, write_snapshots
from cli.edmdcli import EDMDCommandLine
from koopman.basis.monomials import MonomialBasis, WeightScheme
from koopman.dynamics.oracle import exact_koopman_matrix_oracle
from koopman.edmd.EDMD import KoopmanMatrix, KoopmanMethod, SnapshotSet
from koopman.errors import ConfigError, InvalidArgumentError

runner = CliRunner()


@pytest.fixture
def app():
    return EDMDCommandLine().build_app()


def _invoke(app, *args):
    return runner.invoke(app, [str(a) for a in args])


def _identity_file(tmp_path):
    xs = np.linspace(-0.9, 0.9, 10).reshape(-1, 1)
    return write_snapshots(SnapshotSet(xs=xs, ys=xs.copy(), dt=0.5), tmp_path / "identity.csv")


def test_generate_matches_library(app, tmp_path, cubic_snapshots):
    result = _invoke(app, "generate", "--system", "cubic1d", "--m", 20, "--box=0,0.95", "--dt", 0.5,
                     "--seed", 7, "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    data = read_snapshots(tmp_path / "snapshots.csv")
    assert np.array_equal(data.xs, cubic_snapshots.xs)
    assert np.array_equal(data.ys, cubic_snapshots.ys)
    assert data.dt == 0.5
    assert data.metadata["system"] == "cubic1d"
    assert data.metadata["seed"] == 7
    assert "M=20" in result.output


def test_generate_degenerate_box(app, tmp_path):
    result = _invoke(app, "generate", "--system", "cubic1d", "--m", 1, "--box=0,0", "--output", tmp_path / "one.csv")
    assert result.exit_code == 0, result.output
    data = read_snapshots(tmp_path / "one.csv")
    assert data.xs.tolist() == [[0.0]]
    assert data.ys.tolist() == [[0.0]]


def test_generate_needs_a_system(app, tmp_path):
    result = _invoke(app, "generate", "--box=0,1", "--output-dir", tmp_path)
    assert result.exit_code == 1


def test_fit_reports_out_of_domain_sample(app, tmp_path):
    xs = np.array([[0.1], [1.5], [0.3]])
    path = write_snapshots(SnapshotSet(xs=xs, ys=0.5 * xs, dt=1.0), tmp_path / "wide.csv")
    result = _invoke(app, "fit", "--input-file", path, "--degree", 1, "--output-dir", tmp_path)
    assert result.exit_code == 3
    assert "index 1" in result.output


def test_fit_can_drop_out_of_domain_pairs(app, tmp_path):
    xs = np.array([[0.1], [1.5], [0.3]])
    path = write_snapshots(SnapshotSet(xs=xs, ys=0.5 * xs, dt=1.0), tmp_path / "wide.csv")
    result = _invoke(app, "fit", "--input-file", path, "--degree", 1, "--drop-out-of-domain",
                     "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    _, metadata = read_koopman(tmp_path / "koopman.csv")
    assert metadata["samples"] == 2


def test_fit_identity_map(app, tmp_path):
    result = _invoke(app, "fit", "--input-file", _identity_file(tmp_path), "--degree", 3,
                     "--method", "analytic-nonortho", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    K, metadata = read_koopman(tmp_path / "koopman.csv")
    assert K.method == KoopmanMethod.ANALYTIC_NONORTHO
    assert np.max(np.abs(K.values - np.eye(4))) <= 1e-6
    assert metadata["dt"] == 0.5
    assert metadata["blocks"] == [[0, 0, 1], [1, 1, 1], [2, 2, 1], [3, 3, 1]]
    assert "triangularity_max" in metadata


def test_fit_rejects_unknown_method(app, tmp_path):
    result = _invoke(app, "fit", "--input-file", _identity_file(tmp_path), "--method", "dmd",
                     "--output-dir", tmp_path)
    assert result.exit_code == 1


def test_eig_of_diagonal_matrix(app, tmp_path):
    K = KoopmanMatrix(values=np.diag([1.0, 0.5, 0.25]), basis=MonomialBasis.build(1, 2),
                      method=KoopmanMethod.ANALYTIC, dt=1.0)
    path = write_koopman(K, tmp_path / "koopman.csv")
    result = _invoke(app, "eig", "--koopman-file", path, "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "eigenvalues.csv")
    assert_allclose(frame["re_lambda"], [0.0, -math.log(2), -2 * math.log(2)], atol=1e-12)
    assert list(frame["lattice_label"]) == ["(0)", "(1)", "(2)"]
    assert (tmp_path / "eigenvalues.svg").read_text().lstrip().startswith("<?xml")


def test_eig_rejects_malformed_matrix(app, tmp_path):
    path = tmp_path / "koopman.csv"
    path.write_text("a,b\n1,x\n")
    result = _invoke(app, "eig", "--koopman-file", path, "--output-dir", tmp_path)
    assert result.exit_code == 1


def test_eig_rejects_inconsistent_blocks(app, tmp_path):
    K = KoopmanMatrix(values=np.diag([1.0, 0.5, 0.25]), basis=MonomialBasis.build(1, 2),
                      method=KoopmanMethod.ANALYTIC, dt=1.0)
    path = write_koopman(K, tmp_path / "koopman.csv")
    metadata = yaml.safe_load(metadata_path(path).read_text())
    metadata["degree"] = 3
    metadata_path(path).write_text(yaml.safe_dump(metadata))
    assert _invoke(app, "eig", "--koopman-file", path, "--output-dir", tmp_path).exit_code == 1


def test_eigfun_of_polynomial_map(app, tmp_path):
    K = exact_koopman_matrix_oracle([0, 0.5, 0.1], MonomialBasis.build(1, 6))
    path = write_koopman(K, tmp_path / "koopman.csv")
    result = _invoke(app, "eigfun", "--koopman-file", path, "--grid=-0.5,0.5,11", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    values = pd.read_csv(tmp_path / "eigfun_0.csv", comment="#")
    assert len(values) == 11
    assert values["abs_phi"][5] == pytest.approx(0.0, abs=1e-15)
    coefficients = pd.read_csv(tmp_path / "eigfun_0_coefficients.csv")
    assert coefficients["re_coefficient"][1] == pytest.approx(1.0)
    header = yaml.safe_load("".join(line[2:] for line in (tmp_path / "eigfun_0.csv").read_text().splitlines(True)
                                    if line.startswith("#")))
    assert complex(header["mu"]) == pytest.approx(0.5)
    assert header["lambda"] is None


def test_eigfun_rejects_invalid_grid(app, tmp_path):
    K = exact_koopman_matrix_oracle([0, 0.5], MonomialBasis.build(1, 2))
    path = write_koopman(K, tmp_path / "koopman.csv")
    assert _invoke(app, "eigfun", "--koopman-file", path, "--grid", "a,b", "--output-dir", tmp_path).exit_code == 1
    assert _invoke(app, "eigfun", "--koopman-file", path, "--grid=0,1,5", "--index", 3,
                   "--output-dir", tmp_path).exit_code == 1


def test_compare_on_linear_system(app, tmp_path):
    result = _invoke(app, "compare", "--system", "linear:-1,-2", "--m", 30, "--box=-0.5,0.5", "--dt", 0.5,
                     "--seed", 0, "--degree", 2, "--method", "analytic-nonortho", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / "compare.csv")
    analytic = table[(table["method"] == "analytic-EDMD-nonortho") & (table["degree"] == 1)]
    assert_allclose(sorted(analytic["re_lambda"]), [-2.0, -1.0], atol=1e-6)
    dmd = table[table["method"] == "DMD"]
    assert_allclose(sorted(dmd["re_lambda"]), [-2.0, -1.0], atol=1e-6)
    assert np.all(dmd["lattice_distance"] <= 1e-6)
    summary = pd.read_csv(tmp_path / "compare_summary.csv")
    assert set(summary["method"]) == {"analytic-EDMD-nonortho", "EDMD", "kernel-EDMD", "DMD"}
    assert (tmp_path / "compare.svg").exists()


def test_project_writes_exact_coefficients(app, tmp_path):
    result = _invoke(app, "project", "--function", "log(1 + x1)", "--box=-0.5,0.5", "--m", 30, "--degree", 5,
                     "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / "taylor.csv", comment="#")
    assert_allclose(table["exact"], [0.0, 1.0, -0.5, 1 / 3, -0.25, 0.2], atol=1e-14)
    assert np.all(np.isfinite(table["taylor"]))


def test_project_rejects_unknown_symbols(app, tmp_path):
    result = _invoke(app, "project", "--function", "sin(y)", "--box=-0.5,0.5", "--output-dir", tmp_path)
    assert result.exit_code == 1


def test_config_file_with_flag_override(app, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(f"system: cubic1d\nm: 5\nbox: [0, 0.5]\ndt: 0.5\nseed: 3\noutput-dir: {tmp_path}\n")
    result = _invoke(app, "generate", "--config", config, "--m", 7)
    assert result.exit_code == 0, result.output
    data = read_snapshots(tmp_path / "snapshots.csv")
    assert data.size == 7
    assert data.metadata["seed"] == 3


def test_config_rejects_unknown_keys(app, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("system: cubic1d\ncolour: red\n")
    assert _invoke(app, "generate", "--config", config).exit_code == 1


def test_seed_from_environment(app, tmp_path, monkeypatch):
    monkeypatch.setenv("ANALYTIC_EDMD_SEED", "11")
    result = _invoke(app, "generate", "--system", "cubic1d", "--m", 3, "--box=0,0.5", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    assert read_snapshots(tmp_path / "snapshots.csv").metadata["seed"] == 11


def test_run_config_defaults_and_validation():
    cfg = RunConfig.load(None, box="-1,1", equilibrium="0.5")
    assert cfg.kernel == "szego"
    assert cfg.degree == 4 and cfg.m == 20 and cfg.dt == 0.5
    assert cfg.equilibrium == [0.5]
    assert cfg.box_bounds(2) == ([-1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        RunConfig.load(None, box="0,1,0,1").box_bounds(3)
    with pytest.raises(ConfigError):
        RunConfig.load(None, degree=0)
    with pytest.raises(ConfigError):
        RunConfig.load(None, kernel="gaussian")
    with pytest.raises(ConfigError):
        RunConfig.load(None, policy="cholesky")


def test_parse_grid():
    points = parse_grid(["0,1,3"], 2)
    assert points.shape == (9, 2)
    assert points[:3].tolist() == [[0.0, 0.0], [0.0, 0.5], [0.0, 1.0]]
    with pytest.raises(InvalidArgumentError):
        parse_grid(["0,1,3", "0,1,3"], 3)
    with pytest.raises(InvalidArgumentError):
        parse_grid(["1,0,3"], 1)


def test_exact_taylor_coefficients_with_weights():
    basis = MonomialBasis.build(1, 3, WeightScheme.FACTORIAL)
    # e^x = Σ x^k / k! = Σ (1 / sqrt(k!)) · x^k / sqrt(k!)
    coefficients = exact_taylor_coefficients(parse_function("exp(x1)", 1), basis, [0.0])
    assert_allclose(coefficients, [1.0, 1.0, 1 / math.sqrt(2), 1 / math.sqrt(6)], atol=1e-14)


@pytest.mark.parametrize("args", [("--degree", "abc"), ("--bogus-flag", "1")])
def test_usage_errors_exit_with_one(app, tmp_path, args):
    result = _invoke(app, "fit", "--input-file", _identity_file(tmp_path), *args, "--output-dir", tmp_path)
    assert result.exit_code == 1


def test_unknown_command_exits_with_one(app):
    assert _invoke(app, "transform").exit_code == 1


def test_generate_blow_up_exits_with_two(app, tmp_path):
    result = _invoke(app, "generate", "--system", "linear:200", "--m", 3, "--box=0.5,1", "--dt", 10,
                     "--output-dir", tmp_path)
    assert result.exit_code == 2
    assert not (tmp_path / "snapshots.csv").exists()


def test_eig_on_cubic_snapshots(app, tmp_path, cubic_snapshots):
    path = write_snapshots(cubic_snapshots, tmp_path / "cubic.csv")
    result = _invoke(app, "fit", "--input-file", path, "--degree", 4, "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    result = _invoke(app, "eig", "--koopman-file", tmp_path / "koopman.csv", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "eigenvalues.csv")
    lams = frame[frame["degree"] >= 1].sort_values("degree")["re_lambda"].to_numpy()
    assert_allclose(lams, [1.0, 2.0, 3.0, 4.0], rtol=0.05)


def test_compare_on_cubic_snapshots(app, tmp_path, cubic_snapshots):
    path = write_snapshots(cubic_snapshots, tmp_path / "cubic.csv")
    result = _invoke(app, "compare", "--input-file", path, "--degree", 4, "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    summary = pd.read_csv(tmp_path / "compare_summary.csv").set_index("method")["mean_lattice_distance"]
    assert summary["analytic-EDMD"] < summary["EDMD"]


def test_compare_on_van_der_pol_has_no_spurious_eigenvalues(app, tmp_path):
    result = _invoke(app, "compare", "--system", "vanderpol", "--m", 50, "--box=-1,1,-1,1", "--dt", 1,
                     "--seed", 1, "--rescale", 0.5, "--degree", 3, "--drop-out-of-domain", "--output-dir", tmp_path)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / "compare.csv")
    analytic = table[table["method"] == "analytic-EDMD"]
    assert len(analytic) == 10
    assert np.all(analytic["lattice_distance"].dropna() <= 0.1)


def _fit_eig_eigfun(app, snapshots, directory, *fit_args):
    result = _invoke(app, "fit", "--input-file", snapshots, *fit_args, "--drop-out-of-domain",
                     "--output-dir", directory)
    assert result.exit_code == 0, result.output
    koopman = directory / "koopman.csv"
    for command, extra in (("eig", ()), ("eigfun", ("--grid=-1,1,21",))):
        result = _invoke(app, command, "--koopman-file", koopman, *extra, "--output-dir", directory)
        assert result.exit_code == 0, result.output


def test_rotating_pipeline_writes_eigenfunctions(app, tmp_path):
    snapshots = tmp_path / "rotating.csv"
    result = _invoke(app, "generate", "--system", "rotating2d", "--m", 50, "--box=-1,1,-1,1", "--dt", 2,
                     "--seed", 1, "--rescale", 0.5, "--output", snapshots)
    assert result.exit_code == 0, result.output
    _fit_eig_eigfun(app, snapshots, tmp_path, "--degree", 6)
    for i in range(2):
        assert len(pd.read_csv(tmp_path / f"eigfun_{i}.csv", comment="#")) == 21 * 21


@pytest.mark.slow
def test_van_der_pol_250_pairs_at_degree_eight(app, tmp_path):
    snapshots = tmp_path / "vanderpol_m250_dt0.5.csv"
    result = _invoke(app, "generate", "--system", "vanderpol", "--m", 250, "--box=-1,1,-1,1", "--dt", 0.5,
                     "--seed", 1, "--rescale", 0.5, "--output", snapshots)
    assert result.exit_code == 0, result.output
    _fit_eig_eigfun(app, snapshots, tmp_path, "--degree", 8, "--policy", "extended:80")
    frame = pd.read_csv(tmp_path / "eigenvalues.csv")
    pair = frame[frame["degree"] == 1]
    assert_allclose(sorted(pair["im_lambda"]), [-math.sqrt(3) / 2, math.sqrt(3) / 2], atol=5e-2)
    assert_allclose(pair["re_lambda"], [-0.5, -0.5], atol=5e-2)
