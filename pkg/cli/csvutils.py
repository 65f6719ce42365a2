import logging
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from koopman.basis.monomials import DegreeBlock, MonomialBasis, WeightScheme
from koopman.edmd.EDMD import KoopmanMatrix, KoopmanMethod, SnapshotSet
from koopman.errors import ParseError

FLOAT_FORMAT = "%.17g"


def _comment_header(metadata: dict) -> str:
    text = yaml.safe_dump(metadata, default_flow_style=None, sort_keys=False)
    return "".join(f"# {line}\n" for line in text.splitlines())


def _split_comments(path: Path) -> tuple[dict, int]:
    lines = []
    with open(path) as file:
        for line in file:
            if not line.startswith("#"):
                break
            lines.append(line[1:].removeprefix(" "))
    try:
        metadata = yaml.safe_load("".join(lines)) or {}
    except yaml.YAMLError as e:
        raise ParseError(f"Malformed metadata header in {path}: {e}") from e
    if not isinstance(metadata, dict):
        raise ParseError(f"Metadata header of {path} must be key: value lines")
    return metadata, len(lines)


def _read_numeric(path: Path, skiprows: int = 0) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, skiprows=skiprows, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise ParseError(f"Cannot read {path}: {e}") from e
    if frame.empty or not all(pd.api.types.is_numeric_dtype(t) for t in frame.dtypes):
        raise ParseError(f"{path} must hold a non-empty numeric table")
    return frame


def write_snapshots(data: SnapshotSet, path: Path) -> Path:
    """Write a snapshot CSV: `#` metadata lines, header x1..xn,y1..yn, one pair per row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = data.dimension
    metadata = {"n": n, "dt": data.dt, "seed": data.metadata.get("seed"),
                "system": data.metadata.get("system"),
                "box": [list(map(float, pair)) for pair in data.metadata.get("box", [])],
                "equilibrium": [float(a) for a in data.equilibrium], "scale": float(data.scale)}
    frame = pd.DataFrame(np.hstack([data.xs, data.ys]),
                         columns=[f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)])
    with open(path, "w") as file:
        file.write(_comment_header(metadata))
        frame.to_csv(file, index=False, float_format=FLOAT_FORMAT)
    logging.info(f"Wrote {data.size} snapshot pairs to {path}")
    return path


def read_snapshots(path: Path) -> SnapshotSet:
    """Parse a snapshot CSV back into the SnapshotSet that was written (bitwise)."""
    path = Path(path)
    metadata, skip = _split_comments(path)
    frame = _read_numeric(path, skip)
    n = metadata.get("n", frame.shape[1] // 2)
    expected = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
    if list(frame.columns) != expected:
        raise ParseError(f"{path}: expected columns {expected}, got {list(frame.columns)}")
    values = frame.to_numpy(dtype=float)
    extra = {key: metadata[key] for key in ("system", "seed", "box") if metadata.get(key) is not None}
    return SnapshotSet(xs=values[:, :n], ys=values[:, n:], dt=metadata.get("dt"),
                       equilibrium=metadata.get("equilibrium"), scale=metadata.get("scale", 1.0),
                       metadata=extra)


def metadata_path(path: Path) -> Path:
    return Path(path).with_suffix(".meta.yaml")


def write_koopman(K: KoopmanMatrix, path: Path, diagnostics: dict | None = None) -> Path:
    """Write K at 17 significant digits with a sidecar block-metadata YAML file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(K.values, columns=K.basis.labels()).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    metadata = {
        "method": K.method.value,
        "n": K.basis.dimension,
        "degree": K.basis.max_degree,
        "scheme": K.basis.scheme.value,
        "blocks": [list(block) for block in K.blocks],
        "dt": K.dt,
        "equilibrium": [float(a) for a in (np.zeros(K.basis.dimension) if K.equilibrium is None else K.equilibrium)],
        "scale": float(K.scale),
        "gram_condition": None if K.gram_condition is None else float(K.gram_condition),
        "flags": list(K.flags),
    }
    metadata.update(diagnostics or {})
    with open(metadata_path(path), "w") as file:
        yaml.safe_dump(metadata, file, sort_keys=False)
    logging.info(f"Wrote {K.size}x{K.size} Koopman matrix to {path}")
    return path


def read_koopman(path: Path) -> tuple[KoopmanMatrix, dict]:
    """Read a K file and its sidecar; raises ParseError on any inconsistency."""
    path = Path(path)
    try:
        with open(metadata_path(path)) as file:
            metadata = yaml.safe_load(file)
    except (OSError, yaml.YAMLError) as e:
        raise ParseError(f"Cannot read block metadata of {path}: {e}") from e
    try:
        basis = MonomialBasis.build(int(metadata["n"]), int(metadata["degree"]), WeightScheme(metadata["scheme"]))
        blocks = tuple(DegreeBlock(*map(int, block)) for block in metadata["blocks"])
        method = KoopmanMethod(metadata["method"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"Malformed block metadata for {path}: {e}") from e
    values = _read_numeric(path).to_numpy(dtype=float)
    if values.shape != (basis.size, basis.size) or sum(block.size for block in blocks) != basis.size:
        raise ParseError(f"{path}: matrix of shape {values.shape} does not match a basis of size {basis.size}")
    K = KoopmanMatrix(values=values, basis=basis, method=method, blocks=blocks, dt=metadata.get("dt"),
                      equilibrium=np.asarray(metadata.get("equilibrium") or np.zeros(basis.dimension), dtype=float),
                      scale=float(metadata.get("scale", 1.0)), gram_condition=metadata.get("gram_condition"),
                      flags=tuple(metadata.get("flags") or ()))
    return K, metadata


def write_frame(frame: pd.DataFrame, path: Path, header: dict | None = None) -> Path:
    """Write a result table, optionally preceded by `#` comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as file:
        if header:
            file.write(_comment_header(header))
        frame.to_csv(file, index=False, float_format=FLOAT_FORMAT)
    logging.info(f"Wrote {len(frame)} rows to {path}")
    return path
