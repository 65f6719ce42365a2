import os
import sys

from tqdm import tqdm

os.chdir(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.getcwd())

from cli.csvutils import write_snapshots  # noqa: E402
from koopman.dynamics.simulate import SamplingPlan, generate_snapshots  # noqa: E402
from koopman.dynamics.systems import get_system  # noqa: E402

# (file name, system, M, low, high, dt, rescale)
PROTOCOLS = [
    ("cubic1d_dt0.5", "cubic1d", 20, (0.0,), (0.95,), 0.5, 1.0),
    ("vanderpol_m50_dt1", "vanderpol", 50, (-1.0, -1.0), (1.0, 1.0), 1.0, 0.5),
    ("vanderpol_m250_dt0.5", "vanderpol", 250, (-1.0, -1.0), (1.0, 1.0), 0.5, 0.5),
    ("rotating2d_dt2", "rotating2d", 50, (-1.0, -1.0), (1.0, 1.0), 2.0, 0.5),
]


def create_datasets(seed: int = 1, directory: str = "./data") -> list:
    """
    Generate the snapshot set of every benchmark protocol and write it as CSV.
    """
    paths = []
    for name, system, m, low, high, dt, rescale in tqdm(PROTOCOLS, desc="Protocols"):
        data = generate_snapshots(get_system(system), SamplingPlan(count=m, low=low, high=high, dt=dt, seed=seed))
        if rescale != 1.0:
            data = data.rescaled(rescale)
        paths.append(write_snapshots(data, os.path.join(directory, f"{name}.csv")))
    return paths


if __name__ == "__main__":
    for path in create_datasets():
        print(path)
