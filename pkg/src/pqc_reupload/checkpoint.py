"""Versioned text checkpoints for trained models.

A checkpoint is a short header followed by one parameter per line in the flat order of
``ModelParams.flatten``. One-vs-others ensembles store one block per class::

    # pqc-reupload checkpoint
    format_version: 1
    template: pqc-template/1 arch=simple-a fsim_theta=1.5707963267948966 ...
    preprocessing: tabular; columns=worst radius|...; mean=...; scale=...
    classes: binary
    parameters: 15
    ## model 0
    0.12
    ...
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jinja2 import Template

from pqc_reupload.circuits import (
    CircuitTemplate,
    describe_template,
    parse_template_description,
    trainable_count,
)
from pqc_reupload.encoding import FeaturePipeline
from pqc_reupload.errors import CheckpointError, PQCError
from pqc_reupload.training import ModelParams

FORMAT_VERSION = 1
MAGIC = "# pqc-reupload checkpoint"
TEMPLATE_PATH = Path(__file__).parent / "templates" / "checkpoint.txt.j2"
BINARY = "binary"


@dataclass
class Checkpoint:
    """Template, trained parameters and the preprocessing needed to reuse them."""

    template: CircuitTemplate
    models: list[ModelParams]
    preprocessing: str
    classes: list[int] | None = None

    @property
    def is_ensemble(self) -> bool:
        return self.classes is not None

    def pipeline(self, columns: list[str]) -> FeaturePipeline:
        """Feature pipeline of the run that produced the checkpoint."""
        try:
            return FeaturePipeline.parse(self.preprocessing, columns, self.template.conv_spec)
        except PQCError as e:
            raise CheckpointError(f"checkpoint preprocessing does not fit the data: {e}") from e


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Render ``checkpoint`` to ``path``."""
    with open(TEMPLATE_PATH) as file_:
        template = Template(file_.read())
    classes = BINARY if checkpoint.classes is None else ",".join(map(str, checkpoint.classes))
    text = template.render(
        format_version=FORMAT_VERSION,
        template=describe_template(checkpoint.template),
        preprocessing=checkpoint.preprocessing,
        classes=classes,
        n_parameters=trainable_count(checkpoint.template),
        models=[[repr(float(v)) for v in model.flatten()] for model in checkpoint.models],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text.rstrip("\n") + "\n")


def _header(lines: list[str], path: Path) -> dict[str, str]:
    if not lines or lines[0].strip() != MAGIC:
        raise CheckpointError(f"{path}: not a pqc-reupload checkpoint (bad header)")
    header = {}
    for line in lines[1:]:
        if line.startswith("## "):
            break
        key, sep, value = line.partition(":")
        if not sep:
            raise CheckpointError(f"{path}: corrupted header line {line!r}")
        header[key.strip()] = value.strip()
    version = header.get("format_version")
    if version != str(FORMAT_VERSION):
        raise CheckpointError(
            f"{path}: unsupported checkpoint format_version {version!r}, expected {FORMAT_VERSION}"
        )
    missing = {"template", "preprocessing", "classes", "parameters"} - header.keys()
    if missing:
        raise CheckpointError(f"{path}: header is missing {sorted(missing)}")
    return header


def _blocks(lines: list[str], path: Path) -> list[list[float]]:
    blocks: list[list[float]] = []
    for number, line in enumerate(lines, start=1):
        if line.startswith("## model"):
            blocks.append([])
        elif blocks and line.strip():
            try:
                blocks[-1].append(float(line))
            except ValueError as e:
                raise CheckpointError(f"{path}: line {number}: bad parameter {line!r}") from e
    return blocks


def load_checkpoint(path: Path, expected_arch: str | None = None) -> Checkpoint:
    """Read a checkpoint, optionally requiring a given architecture."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    lines = path.read_text().splitlines()
    header = _header(lines, path)
    try:
        template = parse_template_description(header["template"])
    except PQCError as e:
        raise CheckpointError(f"{path}: {e}") from e
    if expected_arch is not None and template.arch_id != expected_arch:
        raise CheckpointError(
            f"{path}: checkpoint architecture {template.arch_id} does not match {expected_arch}"
        )
    expected = trainable_count(template)
    if header["parameters"] != str(expected):
        raise CheckpointError(
            f"{path}: header declares {header['parameters']} parameters, "
            f"{template.arch_id} has {expected}"
        )
    try:
        classes = None if header["classes"] == BINARY else [int(c) for c in header["classes"].split(",")]
    except ValueError as e:
        raise CheckpointError(f"{path}: bad classes line {header['classes']!r}") from e
    blocks = _blocks(lines, path)
    if len(blocks) != (1 if classes is None else len(classes)):
        raise CheckpointError(f"{path}: found {len(blocks)} parameter blocks")
    models = []
    for block in blocks:
        if len(block) != expected:
            raise CheckpointError(f"{path}: parameter block has {len(block)} values, expected {expected}")
        models.append(ModelParams.from_flat(template, np.array(block)))
    return Checkpoint(template, models, header["preprocessing"], classes)
