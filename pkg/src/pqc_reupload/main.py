"""Command-line interface for pqc-reupload.

This module provides a Typer-based CLI that binds datasets, circuit templates, training and
the analysis tools into reproducible runs. Every command writes its CSV outputs together with
``resolved-config.yaml`` into the ``--out`` directory; passing that file back with
``--config`` replays the run.

The CLI supports these commands:
- train: train a classifier on split 0 and save a checkpoint
- eval: score a checkpoint on a dataset split
- crossval: test accuracy over several random splits
- landscape: test cost on a random plane through trained parameters
- scan: sinusoid fit of the circuit output against one angle
- sweep: accuracy over a grid of entangler angles
- arch-compare: parameter counts, layer counts and accuracy per architecture
- estimate-time: device wall-clock estimate of training
- gen-parity: write the parity dataset
- create-config / show-config: manage the YAML configuration

Example:
    Train on the parity dataset:

    $ pqc-reupload train --dataset parity --out runs/parity

    Replay a run:

    $ pqc-reupload train --config runs/parity/resolved-config.yaml
"""

import logging
import shutil
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, cast

import numpy as np
import typer
from pandas import DataFrame
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from pqc_reupload.analysis import (
    IMAGE_CONFIGURATIONS,
    arch_compare,
    hardware_time_estimate,
    harmonic_scan,
    landscape_2d,
    robustness_sweep,
    slice_1d,
)
from pqc_reupload.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from pqc_reupload.circuits import ARCH_IDS, CircuitTemplate, param_count, trainable_count
from pqc_reupload.config import DEFAULT_CONFIG_PATH, SNAPSHOT_NAME, RunConfig, load_config
from pqc_reupload.datasets import (
    ColumnCrop,
    LabeledDataset,
    gen_parity,
    load_dataset,
    split,
    write_csv,
)
from pqc_reupload.encoding import ConvSpec, EncodedData, FeaturePipeline
from pqc_reupload.errors import CheckpointError, ConfigurationError, PQCError
from pqc_reupload.multiclass import (
    OneVsOthersEnsemble,
    confusion,
    cross_validate,
    fit_and_evaluate,
    split_seed,
)
from pqc_reupload.training import ModelParams, accuracy, dataset_cost

app = typer.Typer(help="Quantum data re-uploading classifier on a statevector simulator")
console = Console()

SIMPLE_ARCHS = tuple(a for a in ARCH_IDS if a.startswith("simple-"))

ConfigOption = Annotated[
    Path | None,
    typer.Option(
        "--config",
        "-c",
        help="Path to the YAML configuration file",
        file_okay=True,
        dir_okay=False,
    ),
]
DatasetOption = Annotated[
    str | None, typer.Option("--dataset", help="Dataset: parity, cancer, wines or mnist")
]
DataDirOption = Annotated[
    Path | None, typer.Option("--data-dir", help="Directory with the dataset CSV files")
]
OutOption = Annotated[Path | None, typer.Option("--out", help="Output directory for CSV files")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Master seed of all random streams")]
ThreadsOption = Annotated[
    int | None, typer.Option("--threads", help="Maximum number of parallel trainings")
]
ShotsOption = Annotated[
    int | None, typer.Option("--shots", help="Measurement shots per circuit (0 = exact)")
]
ArchOption = Annotated[str | None, typer.Option("--arch", help=f"Architecture: {', '.join(ARCH_IDS)}")]
IterationsOption = Annotated[
    int | None, typer.Option("--iterations", help="Training iterations per classifier")
]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Enable verbose output")]


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@contextmanager
def _cli_errors() -> Iterator[None]:
    """Report library errors on the console and exit with their exit code."""
    try:
        yield
    except typer.Exit:
        raise
    except PQCError as e:
        console.print(f"✗ Error: {e}", style="red")
        raise typer.Exit(code=e.exit_code) from e
    except Exception as e:
        console.print(f"✗ Unexpected error: {e}", style="red")
        raise typer.Exit(code=1) from e


def _resolve(config_file: Path | None, verbose: bool, **overrides: Any) -> RunConfig:
    """Layer the configuration sources and fill in the dataset presets."""
    _configure_logging(verbose)
    if config_file is not None and not config_file.exists():
        raise ConfigurationError(f"configuration file not found: {config_file}")
    run = load_config(config_file)
    if config_file is not None:
        console.print(f"✓ Loaded configuration from {config_file}", style="green")
    for key in ("data_dir", "out"):
        if overrides.get(key) is not None:
            overrides[key] = str(overrides[key])
    return run.with_overrides(**overrides).resolve()


def _prepare_out(run: RunConfig) -> Path:
    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    run.to_yaml(out / SNAPSHOT_NAME)
    return out


def _save(df: DataFrame, path: Path) -> None:
    df.to_csv(path, index=False)
    console.print(f"💾 Results saved to: {path}", style="green")


def _load(run: RunConfig) -> LabeledDataset:
    dataset = load_dataset(run.dataset, Path(run.data_dir), cast(ColumnCrop, run.crop))
    console.print(
        f"📊 {run.dataset}: {dataset.n_samples} samples, {dataset.n_features} features, "
        f"{dataset.n_classes} classes",
        style="blue",
    )
    return dataset


def _first_split(run: RunConfig, dataset: LabeledDataset) -> tuple[LabeledDataset, LabeledDataset]:
    assert run.split_ratio is not None
    return split(dataset, run.split_ratio, split_seed(run.seed, 0))


def _print_metrics(title: str, rows: list[tuple[str, Any]]) -> None:
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for name, value in rows:
        table.add_row(name, f"{value:.4f}" if isinstance(value, float) else str(value))
    console.print(table)


def _metrics_frame(rows: list[tuple[str, Any]]) -> DataFrame:
    return DataFrame(rows, columns=["metric", "value"])


def _save_confusion(out: Path, matrix_df: DataFrame, percent_df: DataFrame) -> None:
    _save(matrix_df, out / "confusion_counts.csv")
    _save(percent_df, out / "confusion_percent.csv")


@app.command("train")
def train_command(
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    shots: ShotsOption = None,
    arch: ArchOption = None,
    iterations: IterationsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Train a classifier on the first split and save a checkpoint.

    Two-class datasets train a single model; multiclass datasets train one balanced
    one-vs-others classifier per class.
    """
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            data_dir=data_dir,
            out=out,
            seed=seed,
            threads=threads,
            shots=shots,
            arch=arch,
            iterations=iterations,
        )
        out_dir = _prepare_out(run)
        data = _load(run)
        train_set, test_set = _first_split(run, data)
        template = run.template()
        console.print(
            f"🔧 {template.arch_id}: {trainable_count(template)} parameters, "
            f"{template.layer_count} layers",
            style="blue",
        )
        result = fit_and_evaluate(
            run.dataset,
            train_set,
            test_set,
            template,
            run.train_config(),
            run.balance_sigma,
            run.threads,
            run.stump_k,
            "split-0",
        )
        save_checkpoint(
            out_dir / "model.ckpt",
            Checkpoint(template, result.models, result.pipeline.describe(), result.classes),
        )
        console.print(f"💾 Checkpoint saved to: {out_dir / 'model.ckpt'}", style="green")

        rows: list[tuple[str, Any]] = [
            ("train_samples", train_set.n_samples),
            ("test_samples", test_set.n_samples),
        ]
        if result.classes is None:
            history = result.histories[0]
            _save(history.to_dataframe(), out_dir / "history.csv")
            _save(history.scores_dataframe(), out_dir / "scores.csv")
            if len(history):
                rows += [
                    ("cost_train", history.last.cost_train),
                    ("cost_test", history.last.cost_test),
                    ("accuracy_train", history.last.acc_train),
                ]
        else:
            for class_id, history in zip(result.classes, result.histories, strict=True):
                _save(history.to_dataframe(), out_dir / f"history_class-{class_id}.csv")
            assert result.confusion is not None
            _save_confusion(
                out_dir, result.confusion.to_dataframe(), result.confusion.to_dataframe(True)
            )
            rows += [
                (f"accuracy_class-{c}", acc)
                for c, acc in zip(result.classes, result.member_accuracies, strict=True)
            ]
        rows.append(("accuracy_test", result.test_accuracy))
        _save(_metrics_frame(rows), out_dir / "metrics.csv")
        _print_metrics("Training Summary", rows)


def _checkpoint_inputs(
    checkpoint: Checkpoint, data: LabeledDataset
) -> tuple[FeaturePipeline, list[int] | None]:
    pipeline = checkpoint.pipeline(data.column_names())
    if checkpoint.classes is None:
        if data.n_classes > 2:
            raise CheckpointError(
                f"binary checkpoint cannot score {data.n_classes}-class dataset {data.name}"
            )
        return pipeline, None
    unknown = sorted(set(int(c) for c in data.classes()) - set(checkpoint.classes))
    if unknown:
        raise CheckpointError(f"dataset has classes {unknown} the checkpoint was not trained on")
    return pipeline, checkpoint.classes


@app.command("eval")
def eval_command(
    checkpoint_file: Annotated[
        Path, typer.Option("--checkpoint", help="Checkpoint written by the train command")
    ],
    subset: Annotated[
        str, typer.Option("--split", help="Which part of the dataset to score: train, test or all")
    ] = "test",
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    arch: ArchOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Score a checkpoint on a dataset split (confusion matrix for ensembles)."""
    with _cli_errors():
        if subset not in ("train", "test", "all"):
            raise ConfigurationError(f"--split must be train, test or all, got {subset!r}")
        run = _resolve(
            config_file, verbose, dataset=dataset, data_dir=data_dir, out=out, seed=seed
        )
        out_dir = _prepare_out(run)
        checkpoint = load_checkpoint(checkpoint_file, expected_arch=arch)
        data = _load(run)
        if subset != "all":
            train_set, test_set = _first_split(run, data)
            data = train_set if subset == "train" else test_set
        pipeline, classes = _checkpoint_inputs(checkpoint, data)
        template = checkpoint.template

        rows: list[tuple[str, Any]] = [("samples", data.n_samples)]
        if classes is None:
            encoded = pipeline.encode(data.as_binary())
            cost, g = dataset_cost(checkpoint.models[0], template, encoded, run.train_config())
            rows += [("cost", cost), ("accuracy", accuracy(g, encoded.labels))]
        else:
            ensemble = OneVsOthersEnsemble(template, classes, checkpoint.models)
            matrix = confusion(ensemble, pipeline.encode(data))
            _save_confusion(out_dir, matrix.to_dataframe(), matrix.to_dataframe(True))
            rows.append(("accuracy", matrix.accuracy()))
        _save(_metrics_frame(rows), out_dir / "metrics.csv")
        _print_metrics(f"Evaluation ({subset})", rows)


@app.command("crossval")
def crossval_command(
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    shots: ShotsOption = None,
    arch: ArchOption = None,
    iterations: IterationsOption = None,
    splits: Annotated[int | None, typer.Option("--splits", help="Number of random splits")] = None,
    verbose: VerboseOption = False,
) -> None:
    """Mean and spread of test accuracy over seed-derived stratified splits."""
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            data_dir=data_dir,
            out=out,
            seed=seed,
            threads=threads,
            shots=shots,
            arch=arch,
            iterations=iterations,
            n_splits=splits,
        )
        out_dir = _prepare_out(run)
        data = _load(run)
        assert run.split_ratio is not None
        result = cross_validate(
            run.dataset,
            data,
            run.template(),
            run.train_config(),
            run.n_splits,
            run.split_ratio,
            run.balance_sigma,
            run.threads,
            run.stump_k,
        )
        _save(result.to_dataframe(), out_dir / "crossval.csv")
        console.print(
            f"📈 Test accuracy over {run.n_splits} splits: {result.mean:.4f} ± {result.std:.4f}",
            style="bold green",
        )


def _model_for_analysis(
    run: RunConfig, checkpoint_file: Path | None, class_id: int | None
) -> tuple[ModelParams, CircuitTemplate, EncodedData]:
    """A trained model with the encoded test split it is judged on.

    Loads ``checkpoint_file`` when given, otherwise trains like the train command.
    Ensembles are analysed one member at a time (``class_id``, default the first class).
    """
    data = _load(run)
    train_set, test_set = _first_split(run, data)
    if checkpoint_file is not None:
        checkpoint = load_checkpoint(checkpoint_file)
        pipeline, classes = _checkpoint_inputs(checkpoint, test_set)
        template, models = checkpoint.template, checkpoint.models
    else:
        template = run.template()
        result = fit_and_evaluate(
            run.dataset,
            train_set,
            test_set,
            template,
            run.train_config(),
            run.balance_sigma,
            run.threads,
            run.stump_k,
            "split-0",
        )
        pipeline, classes, models = result.pipeline, result.classes, result.models
    if classes is None:
        return models[0], template, pipeline.encode(test_set.as_binary())
    chosen = classes[0] if class_id is None else class_id
    if chosen not in classes:
        raise ConfigurationError(f"--class-id must be one of {classes}, got {chosen}")
    member = classes.index(chosen)
    return models[member], template, pipeline.encode(test_set.one_vs_others(chosen))


@app.command("landscape")
def landscape_command(
    checkpoint_file: Annotated[
        Path | None,
        typer.Option("--checkpoint", help="Checkpoint to analyse (trains one when omitted)"),
    ] = None,
    class_id: Annotated[
        int | None, typer.Option("--class-id", help="Ensemble member to analyse")
    ] = None,
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    arch: ArchOption = None,
    iterations: IterationsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Test cost on a random plane and line through the trained parameters."""
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            data_dir=data_dir,
            out=out,
            seed=seed,
            arch=arch,
            iterations=iterations,
        )
        out_dir = _prepare_out(run)
        model, template, testset = _model_for_analysis(run, checkpoint_file, class_id)
        config = run.train_config()
        grid = landscape_2d(
            model,
            template,
            testset,
            config,
            run.landscape_half_range,
            run.landscape_resolution,
            run.seed,
        )
        _save(grid.to_dataframe(), out_dir / "landscape.csv")
        _save(grid.minima_dataframe(), out_dir / "landscape_minima.csv")
        line = slice_1d(
            model,
            template,
            testset,
            config,
            grid.directions[0],
            run.landscape_half_range,
            run.landscape_resolution,
        )
        _save(line, out_dir / "slice.csv")
        console.print(f"📉 {len(grid.minima)} local minima on the grid", style="blue")


@app.command("scan")
def scan_command(
    param: Annotated[int | None, typer.Option("--param", help="Circuit angle to scan")] = None,
    all_params: Annotated[
        bool, typer.Option("--all-params", help="Fit every circuit angle and write a summary")
    ] = False,
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    out: OutOption = None,
    arch: ArchOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Fit a sinusoid to the circuit output scanned over one angle."""
    with _cli_errors():
        run = _resolve(
            config_file, verbose, dataset=dataset, out=out, arch=arch, scan_param=param
        )
        out_dir = _prepare_out(run)
        template = run.template()
        fit = harmonic_scan(template, run.scan_param, run.scan_points)
        _save(fit.to_dataframe(), out_dir / "harmonic.csv")
        console.print(
            f"〰 angle {run.scan_param}: amplitude {fit.amplitude:.6f}, phase {fit.phase:.6f}, "
            f"offset {fit.offset:.6f}, residual {fit.residual:.2e}",
            style="blue",
        )
        if all_params:
            rows = []
            for index in range(param_count(template)):
                each = harmonic_scan(template, index, run.scan_points)
                rows.append(
                    {
                        "param": index,
                        "amplitude": each.amplitude,
                        "phase": each.phase,
                        "offset": each.offset,
                        "residual": each.residual,
                    }
                )
            _save(DataFrame(rows), out_dir / "harmonic_summary.csv")


@app.command("sweep")
def sweep_command(
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    arch: ArchOption = None,
    iterations: IterationsOption = None,
    splits: Annotated[int | None, typer.Option("--splits", help="Number of random splits")] = None,
    verbose: VerboseOption = False,
) -> None:
    """Cross-validated accuracy over a grid of f-Sim angles."""
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            data_dir=data_dir,
            out=out,
            seed=seed,
            threads=threads,
            arch=arch,
            iterations=iterations,
            n_splits=splits,
        )
        out_dir = _prepare_out(run)
        data = _load(run)
        assert run.arch is not None and run.split_ratio is not None
        grid = robustness_sweep(
            run.dataset,
            data,
            run.arch,
            run.train_config(),
            [t * np.pi for t in run.sweep_thetas],
            [p * np.pi for p in run.sweep_phis],
            run.conv_spec(),
            run.n_splits,
            run.split_ratio,
            run.threads,
        )
        frame = grid.to_dataframe()
        _save(frame, out_dir / "sweep.csv")

        table = Table(title="Accuracy per f-Sim setting")
        table.add_column("θ/π", style="cyan")
        table.add_column("φ/π", style="cyan")
        table.add_column("Accuracy", style="green")
        for _, row in frame.iterrows():
            table.add_row(
                f"{row['theta_over_pi']:.2f}",
                f"{row['phi_over_pi']:.2f}",
                f"{row['accuracy']:.4f} ± {row['accuracy_std']:.4f}",
            )
        console.print(table)


@app.command("arch-compare")
def arch_compare_command(
    counts_only: Annotated[
        bool, typer.Option("--counts-only", help="Report parameter and layer counts without training")
    ] = False,
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    data_dir: DataDirOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    iterations: IterationsOption = None,
    splits: Annotated[int | None, typer.Option("--splits", help="Number of random splits")] = None,
    verbose: VerboseOption = False,
) -> None:
    """Compare architectures of the dataset's kind (image or tabular)."""
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            data_dir=data_dir,
            out=out,
            seed=seed,
            threads=threads,
            iterations=iterations,
            n_splits=splits,
        )
        out_dir = _prepare_out(run)
        configurations: list[tuple[str, ConvSpec | None]]
        if run.is_image:
            configurations = [(a, ConvSpec.parse(key)) for a, key in IMAGE_CONFIGURATIONS]
        else:
            configurations = [(a, None) for a in SIMPLE_ARCHS]
        data = None if counts_only else _load(run)
        assert run.split_ratio is not None
        frame = arch_compare(
            run.dataset,
            data,
            configurations,
            run.train_config(),
            run.n_splits,
            run.split_ratio,
            run.balance_sigma,
            run.threads,
        )
        _save(frame, out_dir / "arch_compare.csv")

        table = Table(title="Architecture Comparison")
        for column in frame.columns:
            table.add_column(str(column), style="cyan" if column == "arch" else "green")
        for _, row in frame.iterrows():
            table.add_row(*[str(v) for v in row])
        console.print(table)


@app.command("estimate-time")
def estimate_time_command(
    m: Annotated[
        int | None,
        typer.Option("--m", help="Number of shifted circuit angles (default: from --arch)"),
    ] = None,
    batch_size: Annotated[int | None, typer.Option("--batch-size", help="Samples per iteration")] = None,
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
    out: OutOption = None,
    shots: Annotated[
        int | None, typer.Option("--shots", help="Measurement repetitions per circuit")
    ] = None,
    arch: ArchOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Device wall-clock estimate of gradient-based training (exact arithmetic)."""
    with _cli_errors():
        run = _resolve(
            config_file,
            verbose,
            dataset=dataset,
            out=out,
            arch=arch,
            batch_size=batch_size,
            timing_shots=shots,
        )
        out_dir = _prepare_out(run)
        template = run.template()
        assert run.batch_size is not None
        report = hardware_time_estimate(
            m if m is not None else param_count(template),
            run.timing_shots,
            run.timing_t_rep_us,
            run.timing_t_rewrite_s,
            run.batch_size,
            run.timing_iterations,
            template,
        )
        _save(report.to_dataframe(), out_dir / "timing.csv")
        console.print(f"⏱ t_grad = {float(report.t_grad):g} s", style="bold green")
        console.print(f"⏱ t_iteration = {float(report.t_iteration):g} s", style="green")
        console.print(f"⏱ t_total = {float(report.t_total):g} s", style="green")


@app.command("gen-parity")
def gen_parity_command(
    bits: Annotated[int, typer.Option("--bits", help="Length of the bit strings")] = 4,
    config_file: ConfigOption = None,
    out: OutOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Write every bit string with its parity label."""
    with _cli_errors():
        run = _resolve(config_file, verbose, out=out)
        out_dir = _prepare_out(run)
        data = gen_parity(bits)
        write_csv(data, out_dir / "parity.csv")
        console.print(
            f"💾 {data.n_samples} rows saved to: {out_dir / 'parity.csv'}", style="green"
        )


@app.command("show-config")
def show_config(
    config_file: ConfigOption = None,
    dataset: DatasetOption = None,
) -> None:
    """Display the resolved configuration settings."""
    with _cli_errors():
        run = _resolve(config_file, False, dataset=dataset)
        if config_file is None:
            console.print("📄 Configuration from defaults and environment variables", style="blue")

        table = Table(title="Resolved Configuration")
        table.add_column("Setting", style="yellow")
        table.add_column("Value", style="green")
        for key, value in run.to_dict().items():
            table.add_row(key, str(value))
        console.print(table)

        template = run.template()
        console.print(
            f"\n🔧 {template.arch_id}: {trainable_count(template)} parameters, "
            f"{template.layer_count} layers",
            style="bold cyan",
        )


@app.command("create-config")
def create_config(
    output_file: Annotated[
        Path, typer.Option("--output", "-o", help="Output file path for the configuration")
    ] = Path("pqc-config.yaml"),
    force: Annotated[bool, typer.Option("--force", "-f", help="Overwrite existing file")] = False,
) -> None:
    """Create a documented default configuration file."""
    with _cli_errors():
        if output_file.exists() and not force:
            console.print(
                f"✗ Configuration file {output_file} already exists. Use --force to overwrite.",
                style="red",
            )
            raise typer.Exit(code=1)
        shutil.copy(DEFAULT_CONFIG_PATH, output_file)
        console.print(f"✓ Created configuration file at {output_file}", style="green")


def main() -> None:
    """Main entry point for the CLI application."""
    app()


if __name__ == "__main__":
    main()
