import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import typer
from scipy import linalg

from cli.RunConfig import RunConfig
from cli.cliutils import (UsageExitGroup, exact_taylor_coefficients, exits_on_error, parse_function, parse_grid,
                          vectorize)
from cli.csvutils import read_koopman, read_snapshots, write_frame, write_koopman, write_snapshots
from cli.plotutils import eigenvalue_scatter
from koopman.dynamics.simulate import SamplingPlan, generate_snapshots
from koopman.dynamics.systems import get_system
from koopman.edmd.EDMD import (SnapshotSet, fit_analytic_edmd, fit_analytic_edmd_nonortho,
                               triangularity_residual)
from koopman.edmd.baselines import fit_dmd, fit_edmd, fit_kernel_edmd
from koopman.errors import AnalyticEDMDError, ConfigError, InvalidArgumentError
from koopman.kernel.gram import gram_matrix
from koopman.kernel.kernels import KernelSpec
from koopman.projection.taylor import SampledFunction, taylor_table
from koopman.spectral.eigen import (block_eigenvalues, evaluate_eigenfunction, generator_eigenvalue,
                                    principal_eigenfunctions)
from koopman.spectral.lattice import lattice_distance, lattice_match, lattice_points

logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=logging.INFO
)

DECAY_TOLERANCE = 1e-10

CONFIG_OPTION = typer.Option(None, "--config", help="flat YAML config file; flags override its keys")
POLICY_HELP = "Gram inversion: extended[:digits] (default extended:50), exact, pinv[:rtol] or ridge:gamma"


class EDMDCommandLine:
    """
    Command-line front end of analytic EDMD.

    Every sub-command builds a RunConfig from an optional YAML file and its flags, runs the
    library and writes its artifacts to the configured output directory.

    Methods
    -------
    generate, project, fit, eig, eigfun, compare
        the sub-commands, registered by build_app
    run()
        parse the command line and dispatch
    """

    @staticmethod
    def _snapshots(cfg: RunConfig) -> SnapshotSet:
        if cfg.input_file is not None:
            return read_snapshots(cfg.input_file)
        if cfg.system is None:
            raise ConfigError("Either --input-file or --system is required")
        system = get_system(cfg.system)
        low, high = cfg.box_bounds(system.dimension)
        plan = SamplingPlan(count=cfg.m, low=low, high=high, dt=cfg.dt, seed=cfg.resolved_seed())
        return generate_snapshots(system, plan, cfg.substeps)

    def _prepare(self, cfg: RunConfig) -> tuple[SnapshotSet, KernelSpec]:
        """Snapshots translated to the requested equilibrium and rescaled, with the kernel to fit them."""
        data = self._snapshots(cfg)
        if cfg.equilibrium is not None:
            data = data.with_equilibrium(cfg.equilibrium)
        if cfg.rescale != 1.0:
            if data.scale == 1.0:
                data = data.rescaled(cfg.rescale)
            elif data.scale != cfg.rescale:
                logging.warning(f"Snapshots are already rescaled by {data.scale}; ignoring --rescale {cfg.rescale}")
        kernel = KernelSpec(family=cfg.kernel, dimension=data.dimension)
        if cfg.drop_out_of_domain:
            data = data.drop_out_of_domain(kernel)
        return data, kernel

    @staticmethod
    def _fit(cfg: RunConfig, data: SnapshotSet, kernel: KernelSpec, method: str):
        basis = kernel.monomial_basis(cfg.degree)
        if method == "analytic-nonortho":
            return fit_analytic_edmd_nonortho(data, basis, kernel, cfg.inversion_policy)
        if method == "edmd":
            return fit_edmd(data, basis)
        return fit_analytic_edmd(data, basis, kernel, cfg.inversion_policy)

    def generate(self,
                 config: Optional[Path] = CONFIG_OPTION,
                 system: Optional[str] = typer.Option(None, help="cubic1d, vanderpol, rotating2d or linear:a1,..."),
                 m: Optional[int] = typer.Option(None, help="number of snapshot pairs"),
                 box: Optional[str] = typer.Option(None, help="low,high per coordinate"),
                 dt: Optional[float] = typer.Option(None, help="sampling time"),
                 seed: Optional[int] = typer.Option(None, help="random seed"),
                 substeps: Optional[int] = typer.Option(None, help="RK4 steps per sample (default keeps h <= 0.01)"),
                 rescale: Optional[float] = typer.Option(None, help="store the data in coordinates rho*x"),
                 equilibrium: Optional[str] = typer.Option(None, help="expansion point recorded with the data"),
                 output_dir: Optional[Path] = typer.Option(None, help="output directory"),
                 output: Optional[Path] = typer.Option(None, help="snapshot file (default <output-dir>/snapshots.csv)")):
        """Sample initial states in a box and integrate a benchmark system into a snapshot CSV."""
        cfg = RunConfig.load(config, system=system, m=m, box=box, dt=dt, seed=seed, substeps=substeps,
                             rescale=rescale, equilibrium=equilibrium, output_dir=output_dir)
        if cfg.system is None:
            raise ConfigError("generate needs --system")
        data = self._snapshots(cfg)
        if cfg.equilibrium is not None:
            data = data.with_equilibrium(cfg.equilibrium)
        if cfg.rescale != 1.0:
            data = data.rescaled(cfg.rescale)
        path = write_snapshots(data, output or cfg.output_dir / "snapshots.csv")
        typer.echo(f"M={data.size} n={data.dimension} dt={data.dt} seed={data.metadata['seed']} "
                   f"box={data.metadata['box']} scale={data.scale} -> {path}")

    def project(self,
                function: str = typer.Option(..., help="expression in x1..xn, e.g. 'log(1 + x1)'"),
                config: Optional[Path] = CONFIG_OPTION,
                kernel: Optional[str] = typer.Option(None, help="szego or exponential"),
                m: Optional[int] = typer.Option(None, help="number of samples"),
                box: Optional[str] = typer.Option(None, help="low,high per coordinate"),
                seed: Optional[int] = typer.Option(None, help="random seed"),
                degree: Optional[int] = typer.Option(None, help="maximal total degree"),
                policy: Optional[str] = typer.Option(None, help=POLICY_HELP),
                equilibrium: Optional[str] = typer.Option(None, help="expansion point"),
                output_dir: Optional[Path] = typer.Option(None, help="output directory")):
        """Taylor coefficients of a sampled function by orthogonal projection in the RKHS."""
        cfg = RunConfig.load(config, kernel=kernel, m=m, box=box, seed=seed, degree=degree, policy=policy,
                             equilibrium=equilibrium, output_dir=output_dir)
        n = len(cfg.equilibrium) if cfg.equilibrium is not None else max(1, len(cfg.box or []) // 2)
        low, high = cfg.box_bounds(n)
        points = SamplingPlan(count=cfg.m, low=low, high=high, seed=cfg.resolved_seed()).draw()
        expression = parse_function(function, n)
        spec = KernelSpec(family=cfg.kernel, dimension=n, center=cfg.equilibrium)
        f = SampledFunction.sample(vectorize(expression, n), points)
        G = gram_matrix(spec, points)
        basis = spec.monomial_basis(cfg.degree)
        exact = exact_taylor_coefficients(expression, basis, spec.center)
        table = taylor_table(f, basis, G, exact=exact, policy=cfg.inversion_policy)
        path = write_frame(table, cfg.output_dir / "taylor.csv",
                           header={"function": function, "kernel": cfg.kernel, "m": cfg.m,
                                   "seed": cfg.resolved_seed(), "policy": cfg.policy})
        typer.echo(table.to_string(index=False))
        typer.echo(f"-> {path}")

    def fit(self,
            config: Optional[Path] = CONFIG_OPTION,
            input_file: Optional[Path] = typer.Option(None, help="snapshot CSV"),
            system: Optional[str] = typer.Option(None, help="generate data from this system instead"),
            m: Optional[int] = typer.Option(None), box: Optional[str] = typer.Option(None),
            dt: Optional[float] = typer.Option(None), seed: Optional[int] = typer.Option(None),
            kernel: Optional[str] = typer.Option(None, help="szego or exponential"),
            equilibrium: Optional[str] = typer.Option(None, help="expansion point in original coordinates"),
            degree: Optional[int] = typer.Option(None, help="maximal total degree"),
            policy: Optional[str] = typer.Option(None, help=POLICY_HELP),
            rescale: Optional[float] = typer.Option(None, help="fit on rho*x data"),
            drop_out_of_domain: bool = typer.Option(False, "--drop-out-of-domain",
                                                    help="drop pairs outside the kernel domain instead of aborting"),
            method: Optional[str] = typer.Option(None, help="analytic, analytic-nonortho or edmd"),
            output_dir: Optional[Path] = typer.Option(None, help="output directory")):
        """Fit the Koopman matrix and write it with its block metadata and diagnostics."""
        cfg = RunConfig.load(config, input_file=input_file, system=system, m=m, box=box, dt=dt, seed=seed,
                             kernel=kernel, equilibrium=equilibrium, degree=degree, policy=policy,
                             rescale=rescale, drop_out_of_domain=drop_out_of_domain or None, method=method,
                             output_dir=output_dir)
        data, spec = self._prepare(cfg)
        K = self._fit(cfg, data, spec, cfg.method)
        residual_max, residual_relative = triangularity_residual(K)
        logging.info(f"Fit completed: {K.method.value}, N={K.size}, M={data.size}, "
                     f"triangularity residual max {residual_max:.3e} (relative {residual_relative:.3e})")
        path = write_koopman(K, cfg.output_dir / "koopman.csv",
                             diagnostics={"kernel": cfg.kernel, "policy": cfg.policy, "samples": data.size,
                                          "triangularity_max": residual_max,
                                          "triangularity_relative": residual_relative})
        typer.echo(f"{K.method.value}: N={K.size} M={data.size} triangularity max={residual_max:.3e} "
                   f"relative={residual_relative:.3e} gram condition={K.gram_condition} -> {path}")

    def eig(self,
            config: Optional[Path] = CONFIG_OPTION,
            koopman_file: Optional[Path] = typer.Option(None, help="K file written by fit"),
            tol: Optional[float] = typer.Option(None, help="lattice matching tolerance"),
            output_dir: Optional[Path] = typer.Option(None, help="output directory")):
        """Block eigenvalues of K, their lattice labels and an SVG scatter."""
        cfg = RunConfig.load(config, koopman_file=koopman_file, tol=tol, output_dir=output_dir)
        if cfg.koopman_file is None:
            raise ConfigError("eig needs --koopman-file")
        K, _ = read_koopman(cfg.koopman_file)
        report = lattice_match(block_eigenvalues(K, K.dt), cfg.tol, K.dt)
        frame = report.as_frame()
        path = write_frame(frame, cfg.output_dir / "eigenvalues.csv")
        generators = [eig.lam if report.continuous else eig.mu for eig in report.eigenvalues if eig.degree == 1]
        lattice = [point for block in K.blocks
                   for _, point in lattice_points(generators, block.degree, report.continuous)]
        values = [eig.lam if report.continuous else eig.mu for eig in report.eigenvalues]
        values = [np.nan if value is None else value for value in values]
        axis = "λ" if report.continuous else "μ"
        eigenvalue_scatter({K.method.value: np.array(values, dtype=complex)}, np.array(lattice),
                           cfg.output_dir / "eigenvalues.svg", title=f"Block eigenvalues ({K.method.value})",
                           xlabel=f"Re {axis}", ylabel=f"Im {axis}")
        typer.echo(frame.to_string(index=False))
        typer.echo(f"{len(report.unmatched)} of {len(report.eigenvalues)} eigenvalues unmatched within tol={cfg.tol}; "
                   f"mean lattice error {report.mean_error:.3e} -> {path}")

    def eigfun(self,
               config: Optional[Path] = CONFIG_OPTION,
               koopman_file: Optional[Path] = typer.Option(None, help="K file written by fit"),
               grid: Optional[List[str]] = typer.Option(None, help="low,high,count per axis (repeat per axis)"),
               index: Optional[int] = typer.Option(None, help="principal eigenfunction index (default: all)"),
               output_dir: Optional[Path] = typer.Option(None, help="output directory")):
        """Principal eigenfunctions of K: Taylor coefficients and values on a grid."""
        cfg = RunConfig.load(config, koopman_file=koopman_file, output_dir=output_dir)
        if cfg.koopman_file is None:
            raise ConfigError("eigfun needs --koopman-file")
        K, _ = read_koopman(cfg.koopman_file)
        points = parse_grid(grid or [], K.basis.dimension)
        eigenfunctions = principal_eigenfunctions(K)
        if index is not None and not 0 <= index < len(eigenfunctions):
            raise InvalidArgumentError(f"Eigenfunction index {index} out of range 0..{len(eigenfunctions) - 1}")
        center = K.equilibrium / K.scale
        for i in ([index] if index is not None else range(len(eigenfunctions))):
            ef = eigenfunctions[i].unscaled(K.scale)
            values = evaluate_eigenfunction(ef, K.basis, points, center)
            radius = values.attrs["convergence_radius"]
            header = {"index": i, "mu": str(ef.mu), "lambda": None if ef.lam is None else str(ef.lam),
                      "convergence_radius": float(radius), "resonant_degrees": list(ef.resonant_degrees)}
            outside = int(np.count_nonzero(np.max(np.abs(points - center), axis=1) >= radius))
            if outside:
                header["warning"] = f"{outside} grid points beyond the estimated radius of convergence"
            write_frame(values, cfg.output_dir / f"eigfun_{i}.csv", header=header)
            coefficients = pd.DataFrame({"degree": K.basis.degrees, "exponents": K.basis.labels(),
                                         "re_coefficient": ef.coefficients.coefficients.real,
                                         "im_coefficient": ef.coefficients.coefficients.imag})
            write_frame(coefficients, cfg.output_dir / f"eigfun_{i}_coefficients.csv")
            typer.echo(f"eigenfunction {i}: mu={ef.mu:.6g} lambda={ef.lam} radius≈{radius:.3g}")

    def compare(self,
                config: Optional[Path] = CONFIG_OPTION,
                input_file: Optional[Path] = typer.Option(None, help="snapshot CSV"),
                system: Optional[str] = typer.Option(None, help="generate data from this system instead"),
                m: Optional[int] = typer.Option(None), box: Optional[str] = typer.Option(None),
                dt: Optional[float] = typer.Option(None), seed: Optional[int] = typer.Option(None),
                kernel: Optional[str] = typer.Option(None, help="szego or exponential"),
                equilibrium: Optional[str] = typer.Option(None, help="expansion point in original coordinates"),
                degree: Optional[int] = typer.Option(None, help="maximal total degree"),
                policy: Optional[str] = typer.Option(None, help=POLICY_HELP),
                rescale: Optional[float] = typer.Option(None, help="fit on rho*x data"),
                drop_out_of_domain: bool = typer.Option(False, "--drop-out-of-domain",
                                                        help="drop pairs outside the kernel domain instead of aborting"),
                method: Optional[str] = typer.Option(None, help="analytic or analytic-nonortho for the analytic row"),
                output_dir: Optional[Path] = typer.Option(None, help="output directory")):
        """Spectra of analytic EDMD, EDMD, kernel EDMD and DMD against the same eigenvalue lattice."""
        cfg = RunConfig.load(config, input_file=input_file, system=system, m=m, box=box, dt=dt, seed=seed,
                             kernel=kernel, equilibrium=equilibrium, degree=degree, policy=policy,
                             rescale=rescale, drop_out_of_domain=drop_out_of_domain or None,
                             method=method, output_dir=output_dir)
        data, spec = self._prepare(cfg)
        analytic = self._fit(cfg, data, spec, "analytic" if cfg.method == "edmd" else cfg.method)
        block = block_eigenvalues(analytic, data.dt)
        spectra = {
            analytic.method.value: ([eig.mu for eig in block], [eig.degree for eig in block]),
            "EDMD": (linalg.eigvals(fit_edmd(data, analytic.basis).values), None),
            "kernel-EDMD": (linalg.eigvals(fit_kernel_edmd(data, spec, cfg.inversion_policy)), None),
            "DMD": (linalg.eigvals(fit_dmd(data)), None),
        }
        generators = self._reference_generators(cfg, data, block)
        rows, summary, series = [], [], {}
        for name, (mus, degrees) in spectra.items():
            mus = np.asarray(mus, dtype=complex)
            largest = np.max(np.abs(mus), initial=0.0)
            lams = [None if abs(mu) <= DECAY_TOLERANCE * largest else generator_eigenvalue(mu, data.dt) for mu in mus]
            values = lams if data.dt is not None else [None if abs(mu) <= DECAY_TOLERANCE * largest else mu for mu in mus]
            distances = lattice_distance(values, generators, cfg.degree, data.dt)
            for k, mu in enumerate(mus):
                rows.append({"method": name, "degree": np.nan if degrees is None else degrees[k],
                             "re_mu": mu.real, "im_mu": mu.imag,
                             "re_lambda": np.nan if lams[k] is None else lams[k].real,
                             "im_lambda": np.nan if lams[k] is None else lams[k].imag,
                             "lattice_distance": distances[k]})
            finite = distances[np.isfinite(distances)]
            summary.append({"method": name, "eigenvalues": len(mus),
                            "mean_lattice_distance": float(np.mean(finite)) if finite.size else np.nan,
                            "max_lattice_distance": float(np.max(finite)) if finite.size else np.nan})
            series[name] = np.array([np.nan if v is None else v for v in values], dtype=complex)
        table, summary = pd.DataFrame(rows), pd.DataFrame(summary)
        write_frame(table, cfg.output_dir / "compare.csv")
        path = write_frame(summary, cfg.output_dir / "compare_summary.csv")
        continuous = data.dt is not None
        lattice = [point for r in range(cfg.degree + 1) for _, point in lattice_points(generators, r, continuous)]
        axis = "λ" if continuous else "μ"
        eigenvalue_scatter(series, np.array(lattice), cfg.output_dir / "compare.svg",
                           title="Method comparison", xlabel=f"Re {axis}", ylabel=f"Im {axis}")
        typer.echo(summary.to_string(index=False))
        typer.echo(f"-> {path}")

    @staticmethod
    def _reference_generators(cfg: RunConfig, data: SnapshotSet, block) -> list[complex]:
        """Jacobian eigenvalues of a known system at x*, else the fitted degree-1 eigenvalues."""
        name = cfg.system or data.metadata.get("system")
        if name is not None and data.dt is not None:
            try:
                system = get_system(name)
                return [complex(a) for a in system.linearization_eigs(data.equilibrium / data.scale)]
            except AnalyticEDMDError:
                logging.info(f"No reference vector field for '{name}'; using fitted degree-1 eigenvalues")
        first = [eig for eig in block if eig.degree == 1]
        return [eig.lam if data.dt is not None else eig.mu for eig in first]

    def build_app(self) -> typer.Typer:
        """Register every sub-command on a typer application."""
        app = typer.Typer(cls=UsageExitGroup, add_completion=False,
                          help="Analytic EDMD: Koopman spectra from snapshot data.")
        handlers = [("generate", self.generate),
                    ("project", self.project),
                    ("fit", self.fit),
                    ("eig", self.eig),
                    ("eigfun", self.eigfun),
                    ("compare", self.compare)]
        for name, handler in handlers:
            app.command(name)(exits_on_error(handler))
        return app

    def run(self):
        self.build_app()()


if __name__ == '__main__':
    EDMDCommandLine().run()
