import os
import sys

import numpy as np
import pandas as pd
from tqdm import tqdm

os.chdir(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.getcwd())

from koopman.dynamics.simulate import SamplingPlan  # noqa: E402
from koopman.kernel.gram import gram_matrix  # noqa: E402
from koopman.kernel.kernels import KernelFamily, KernelSpec  # noqa: E402
from koopman.projection.taylor import SampledFunction, taylor_table  # noqa: E402


def taylor_errors(seeds: range, m: int = 10, degree: int = 5) -> pd.DataFrame:
    """
    Absolute errors of the Taylor coefficients of log(1+x) for every seed, projected from m samples in (-0.95, 0.95).
    """
    spec = KernelSpec(KernelFamily.SZEGO, 1)
    basis = spec.monomial_basis(degree)
    exact = np.array([0.0] + [(-1) ** (k + 1) / k for k in range(1, degree + 1)])
    rows = []
    for seed in tqdm(seeds, desc="Seeds"):
        points = SamplingPlan(count=m, low=(-0.95,), high=(0.95,), seed=seed).draw()
        f = SampledFunction.sample(lambda x: np.log1p(x[:, 0]), points)
        table = taylor_table(f, basis, gram_matrix(spec, points), exact=exact)
        table["seed"] = seed
        table["taylor_error"] = np.abs(table["taylor"] - table["exact"])
        table["l2_error"] = np.abs(table["l2"] - table["exact"])
        rows.append(table)
    return pd.concat(rows, ignore_index=True)


def main():
    errors = taylor_errors(range(20))
    summary = errors.groupby("degree")[["taylor_error", "l2_error"]].median()
    print(summary.to_string())
    os.makedirs("results", exist_ok=True)
    errors.to_csv("./results/taylor_errors.csv", index=False)


if __name__ == "__main__":
    main()
