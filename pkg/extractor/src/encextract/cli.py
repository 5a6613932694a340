"""Command-line entry point."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import InputError


@click.command()
@click.option("--model", "model_id", required=True, help="Checkpoint directory or hub id.")
@click.option(
    "--events",
    "events_path",
    required=True,
    type=click.Path(path_type=Path),
    help="Word/onset TSV for the stimulus.",
)
@click.option(
    "--text",
    "text_path",
    required=True,
    type=click.Path(path_type=Path),
    help="Stimulus transcript (UTF-8 plain text).",
)
@click.option(
    "--out",
    "out_dir",
    required=True,
    type=click.Path(path_type=Path),
    help="Output directory for layer matrices and the manifest.",
)
@click.option("--window", type=int, default=None, help="Override the context window length.")
@click.option(
    "--threads",
    type=int,
    default=1,
    show_default=True,
    help="Torch CPU threads; 1 keeps reruns byte-identical.",
)
def main(
    model_id: str,
    events_path: Path,
    text_path: Path,
    out_dir: Path,
    window: int | None,
    threads: int,
) -> None:
    """Extract per-word, per-layer model activations for one stimulus.

    Writes layer_00.npy (embedding output) through layer_NN.npy plus an
    extraction.json manifest into the output directory.
    """
    import torch

    torch.set_num_threads(max(1, threads))
    try:
        from .extract import extract, write_features
        from .io import read_events

        events = read_events(events_path)
        if not text_path.is_file():
            raise InputError(f"text file not found: {text_path}")
        text = text_path.read_text(encoding="utf-8")
        layers, _, manifest = extract(model_id, text, events, window=window)
        write_features(out_dir, layers, manifest)
    except InputError as exc:
        click.echo(f"encextract: {exc}", err=True)
        sys.exit(2)
    click.echo(
        f"wrote {len(layers)} layers x {manifest['n_words']} words x "
        f"{manifest['hidden_size']} units to {out_dir}"
    )


if __name__ == "__main__":
    main()
