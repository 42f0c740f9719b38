"""Write the canonical dataset CSVs used by ``pqc-reupload``.

The UCI breast cancer and wine tables and the 8x8 handwritten digits ship with
scikit-learn, so no network access is needed. Each file has one column per feature, in
scikit-learn's order, followed by an integer ``label`` column.

Example:
    $ python scripts/fetch_datasets.py --data-dir data
"""

from pathlib import Path
from typing import Annotated

import numpy as np
import typer
from rich.console import Console
from sklearn.datasets import load_breast_cancer, load_digits, load_wine
from sklearn.utils import Bunch

from pqc_reupload.datasets import DATASETS, LabeledDataset, write_csv

console = Console()


def _tabular(name: str, bunch: Bunch) -> LabeledDataset:
    features = np.asarray(bunch.data, dtype=float)
    labels = np.asarray(bunch.target, dtype=int)
    columns = tuple(str(c) for c in bunch.feature_names)
    return LabeledDataset(features, labels, columns, name)


def _digits() -> LabeledDataset:
    bunch = load_digits()
    columns = tuple(f"s{r}_{c}" for r in range(8) for c in range(8))
    return LabeledDataset(
        np.asarray(bunch.data, dtype=float), np.asarray(bunch.target, dtype=int), columns, "mnist"
    )


def fetch(
    data_dir: Annotated[
        Path, typer.Option("--data-dir", help="Directory to write the CSV files into")
    ] = Path("data"),
) -> None:
    """Write cancer.csv, wines.csv and digits.csv."""
    datasets = {
        "cancer": _tabular("cancer", load_breast_cancer()),
        "wines": _tabular("wines", load_wine()),
        "mnist": _digits(),
    }
    for name, dataset in datasets.items():
        filename = DATASETS[name].filename
        assert filename is not None
        write_csv(dataset, data_dir / filename)
        console.print(
            f"💾 {name}: {dataset.n_samples} rows saved to {data_dir / filename}", style="green"
        )


if __name__ == "__main__":
    typer.run(fetch)
