"""Command line for training runs, experiment sweeps, Fourier oracles and MNIST."""

import argparse
import configparser
import difflib
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from . import __version__
from .classify import (
    accuracy,
    read_idx_images,
    read_idx_labels,
    select_digits,
    split_labeled,
    train_one_vs_all,
)
from .exceptions import (
    ArffConfigError,
    ArffError,
    ArffSolverError,
    ArffValidationError,
    IdxFormatError,
)
from .io import (
    environment_record,
    read_metadata,
    write_accuracy,
    write_digit_history,
    write_history,
    write_metadata,
    write_model,
    write_overall,
    write_snapshot,
    write_sweep,
    write_table,
)
from .models import (
    CutoffConfig,
    SolverConfig,
    SpectrumTerm,
    TargetSpec,
    TrainConfig,
)
from .presets import ExperimentPoint, PointOutcome, build_preset, run_point
from .rng import SEED_BITS, RngStream
from .targets import (
    compute_fourier_table,
    default_grid,
    optimal_distribution,
    parseval_check,
    rate_constant,
)

logger = logging.getLogger("adaptive_rff")

SEED_ENV = "ARFF_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

MNIST_VALIDATION_FRACTION = 1 / 6
# Digit networks use child streams 0-9 of the classifier seed.
MNIST_SPLIT_STREAM = 10
DESK_TRAIN_LIMIT = 4000

POINT_KEYS = ("J", "noise_std", "test_size")
SECTION_KEYS: dict[str, tuple[str, ...]] = {
    "target": ("kind", "direction", "sharpness", "period", "spectrum"),
    "train": tuple(
        name
        for name in TrainConfig.model_fields
        if name not in ("walk", "cutoff", "solver", "base")
    )
    + POINT_KEYS,
    "walk": ("delta", "eps_hat"),
    "cutoff": tuple(CutoffConfig.model_fields),
    "solver": tuple(SolverConfig.model_fields),
}


# Configuration files


def read_config(path: Path) -> dict[str, dict[str, str]]:
    """Read a flat INI file and reject unknown sections or keys.

    Every unknown key is reported with the closest valid key of its section.

    Raises:
        ArffConfigError: On unknown sections or keys, or unreadable syntax.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as stream:
            parser.read_file(stream)
    except configparser.Error as e:
        raise ArffConfigError(f"{path}: {e}") from e

    problems: list[tuple[str, Optional[str]]] = []
    sections: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        valid = SECTION_KEYS.get(section)
        if valid is None:
            close = difflib.get_close_matches(section, SECTION_KEYS, n=1)
            problems.append((f"[{section}]", f"[{close[0]}]" if close else None))
            continue
        for key in parser[section]:
            if key not in valid:
                close = difflib.get_close_matches(key, valid, n=1)
                problems.append((f"{section}.{key}", close[0] if close else None))
        sections[section] = dict(parser[section])

    if problems:
        lines = [
            f"unknown key {key}" + (f" (did you mean {hint}?)" if hint else "")
            for key, hint in problems
        ]
        key, hint = problems[0]
        raise ArffConfigError("; ".join(lines), key=key, suggestion=hint)
    return sections


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.replace(",", " ").split())


def _spectrum(text: str) -> tuple[SpectrumTerm, ...]:
    """Terms ``i1 i2 ... = re [im]`` separated by semicolons."""
    terms = []
    for entry in filter(None, (part.strip() for part in text.split(";"))):
        index, _, value = entry.partition("=")
        parts = _floats(value)
        if not parts or len(parts) > 2:
            raise ArffConfigError(f"bad spectrum term {entry!r}", key="spectrum")
        terms.append(
            SpectrumTerm(
                index=tuple(int(i) for i in _floats(index)),
                re=parts[0],
                im=parts[1] if len(parts) == 2 else 0.0,
            )
        )
    return tuple(terms)


def _validation_message(e: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
        for err in e.errors()
    )


def target_from_config(sections: dict[str, dict[str, str]]) -> TargetSpec:
    raw: dict[str, Any] = dict(sections.get("target", {}))
    if not raw:
        raise ArffConfigError("missing [target] section", key="target")
    try:
        if "direction" in raw:
            raw["direction"] = _floats(raw["direction"])
        if "spectrum" in raw:
            raw["spectrum"] = _spectrum(raw["spectrum"])
        return TargetSpec(**raw)
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise ArffConfigError(f"[target] {_validation_message(e)}") from e
        raise ArffConfigError(f"[target] {e}") from e


def point_from_config(
    sections: dict[str, dict[str, str]], label: str = "train"
) -> ExperimentPoint:
    """Build a training point from the sections of a config file.

    Raises:
        ArffConfigError: If a section is missing or a value is invalid.
    """
    target = target_from_config(sections)
    train = dict(sections.get("train", {}))
    walk: dict[str, Any] = dict(sections.get("walk", {}))
    if not train or not walk:
        raise ArffConfigError("a training config needs [train] and [walk]")
    point_fields = {key: train.pop(key) for key in POINT_KEYS if key in train}
    algorithm = train.get("algorithm")
    if algorithm == "alg2":
        walk.update(mode="lattice", lattice=target.lattice)
    elif algorithm == "alg3":
        walk["mode"] = "adaptive"
    try:
        config = TrainConfig(
            walk=walk,
            cutoff=sections.get("cutoff", {}),
            solver=sections.get("solver", {}),
            **train,
        )
        return ExperimentPoint(
            label=label,
            parameter="none",
            value=0.0,
            target=target,
            config=config,
            **point_fields,
        )
    except ValidationError as e:
        raise ArffConfigError(_validation_message(e)) from e


def seed_override() -> Optional[int]:
    """Seed from ``ARFF_SEED`` (environment or ``.env``), if set."""
    value = os.getenv(SEED_ENV)
    if value is None or not value.strip():
        return None
    try:
        seed = int(value)
    except ValueError as e:
        raise ArffConfigError(f"{SEED_ENV} must be an integer", key=SEED_ENV) from e
    if not 0 <= seed < 2**SEED_BITS:
        raise ArffConfigError(
            f"{SEED_ENV} must lie in [0, 2**{SEED_BITS}), got {seed}", key=SEED_ENV
        )
    return seed


# Commands


def _point_record(point: ExperimentPoint, outcome: PointOutcome) -> dict:
    return {
        "point": point.model_dump(mode="json"),
        "summary": outcome.summary.model_dump(mode="json"),
        "noise_to_signal": outcome.noise_to_signal,
    }


def _write_point(
    point: ExperimentPoint,
    outcome: PointOutcome,
    history_path: Path,
    snapshot_dir: Path,
):
    write_history(history_path, outcome.history)
    if point.config.snapshot_every is not None or point.config.full_history:
        for snapshot in outcome.history.snapshots:
            write_snapshot(
                snapshot_dir / f"snapshot_{snapshot.iteration}.csv", snapshot
            )


def cmd_train(config_path: Path, output_dir: Path) -> int:
    point = point_from_config(read_config(config_path))
    seed = seed_override()
    if seed is not None:
        point = point.with_seed(seed)
    outcome = run_point(point)

    output_dir = Path(output_dir)
    _write_point(
        point, outcome, output_dir / "history.csv", output_dir / "snapshots"
    )
    write_model(output_dir / "model.csv", outcome.model)
    write_metadata(
        output_dir / "metadata.json",
        {
            "command": "train",
            "seed": point.config.seed,
            "points": [_point_record(point, outcome)],
            "environment": environment_record(),
        },
    )
    logger.info(f"wrote results to {output_dir}")
    return EXIT_OK


def run_points(
    points: tuple[ExperimentPoint, ...], output_dir: Path, jobs: int
) -> list[PointOutcome]:
    """Run sweep points on up to ``jobs`` threads and write one CSV per point."""
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(run_point, points))
    for point, outcome in zip(points, outcomes):
        _write_point(
            point,
            outcome,
            output_dir / f"{point.label}.csv",
            output_dir / "snapshots" / point.label,
        )
    write_sweep(output_dir / "sweep.csv", [o.summary for o in outcomes])
    return outcomes


def cmd_experiment(name: str, scale: str, output_dir: Path, jobs: int = 1) -> int:
    preset = build_preset(name, scale)
    if preset.classifier is not None:
        raise ArffConfigError(
            f"preset {name!r} needs image files; use 'arff mnist'", key=name
        )
    seed = seed_override()
    if seed is not None:
        preset = preset.with_seed(seed)

    output_dir = Path(output_dir)
    logger.info(f"{name} ({scale}): {len(preset.points)} points, jobs={jobs}")
    outcomes = run_points(preset.points, output_dir, jobs)
    write_metadata(
        output_dir / "metadata.json",
        {
            "command": "experiment",
            "preset": name,
            "scale": scale,
            "points": [
                _point_record(point, outcome)
                for point, outcome in zip(preset.points, outcomes)
            ],
            "environment": environment_record(),
        },
    )
    logger.info(f"wrote {len(outcomes)} point files and sweep.csv to {output_dir}")
    return EXIT_OK


def cmd_replay(metadata_path: Path, output_dir: Path, jobs: int = 1) -> int:
    """Re-run every point recorded in a metadata file."""
    record = read_metadata(metadata_path)
    try:
        points = tuple(
            ExperimentPoint.model_validate(entry["point"])
            for entry in record["points"]
        )
    except (KeyError, TypeError) as e:
        raise ArffConfigError(f"{metadata_path}: not a run metadata record") from e
    except ValidationError as e:
        raise ArffConfigError(_validation_message(e)) from e

    output_dir = Path(output_dir)
    if record.get("command") == "train":
        return _replay_train(points[0], output_dir)
    run_points(points, output_dir, jobs)
    logger.info(f"replayed {len(points)} points into {output_dir}")
    return EXIT_OK


def _replay_train(point: ExperimentPoint, output_dir: Path) -> int:
    outcome = run_point(point)
    _write_point(
        point, outcome, output_dir / "history.csv", output_dir / "snapshots"
    )
    write_model(output_dir / "model.csv", outcome.model)
    return EXIT_OK


def cmd_oracle(
    config_path: Path,
    n_max: int,
    output: Path,
    grid: Optional[int] = None,
    refine: bool = False,
) -> int:
    """Tabulate Fourier coefficients and print the optimal rate constant."""
    spec = target_from_config(read_config(config_path))
    grid = grid or default_grid(n_max)
    table = compute_fourier_table(spec, n_max, grid)
    write_table(Path(output), table)

    p_star = optimal_distribution(table)
    report = parseval_check(table, spec, grid)
    summary = (
        f"C_p*={rate_constant(table, p_star):.17g} "
        f"sum_abs={float(np.sum(np.abs(table.coefficients))):.17g} "
        f"coefficient_energy={report.coefficient_energy:.17g} "
        f"mean_square={report.mean_square:.17g} "
        f"parseval_gap={report.gap:.17g}"
    )
    if refine:
        refined = compute_fourier_table(spec, n_max, 2 * grid)
        delta = float(np.max(np.abs(refined.coefficients - table.coefficients)))
        summary += f" refine_max_delta={delta:.17g}"
    print(summary)
    logger.info(f"wrote {table.coefficients.size} coefficients to {output}")
    return EXIT_OK


def cmd_mnist(
    images: Path,
    labels: Path,
    output_dir: Path,
    scale: str = "desk",
    test_images: Optional[Path] = None,
    test_labels: Optional[Path] = None,
    limit: Optional[int] = None,
    jobs: int = 1,
) -> int:
    config = build_preset("mnist", scale).classifier
    seed = seed_override()
    update: dict[str, Any] = {"jobs": jobs}
    if seed is not None:
        update["seed"] = seed
    config = config.model_copy(update=update)
    if limit is None and scale == "desk":
        limit = DESK_TRAIN_LIMIT

    all_images, all_labels = select_digits(
        read_idx_images(images), read_idx_labels(labels), config.digits
    )
    if limit is not None and limit < all_images.count:
        keep = np.arange(limit)
        all_images, all_labels = all_images.subset(keep), all_labels.subset(keep)
    train, val = split_labeled(
        all_images,
        all_labels,
        MNIST_VALIDATION_FRACTION,
        RngStream(config.seed).spawn(MNIST_SPLIT_STREAM),
    )
    result = train_one_vs_all(train, val, config)

    output_dir = Path(output_dir)
    for digit, records in result.digit_histories.items():
        write_digit_history(output_dir / f"digit_{digit}.csv", records)
    write_overall(output_dir / "overall.csv", result.overall_history)

    train_acc = accuracy(result.models, *train, result.digits)
    rows: list[tuple[str, float, Optional[int]]] = [
        ("train", train_acc, result.best_iteration),
        ("val", result.best_val_accuracy, result.best_iteration),
    ]
    if test_images is not None and test_labels is not None:
        test = select_digits(
            read_idx_images(test_images), read_idx_labels(test_labels), config.digits
        )
        test_acc = accuracy(result.models, *test, result.digits)
        rows.append(("test", test_acc, result.best_iteration))
        logger.info(f"test accuracy {test_acc:.4f}")
    write_accuracy(output_dir / "accuracy.csv", rows)
    write_metadata(
        output_dir / "metadata.json",
        {
            "command": "mnist",
            "scale": scale,
            "limit": limit,
            "classifier": config.model_dump(mode="json"),
            "environment": environment_record(),
        },
    )
    return EXIT_OK


# Entry point


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        prog="arff", description="Adaptive random Fourier features"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--debug", action="store_true", help="Enable debug logging."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Run one config file.")
    train.add_argument("-c", "--config", type=Path, required=True)
    train.add_argument("-o", "--output", type=Path, required=True)

    experiment = commands.add_parser("experiment", help="Run a preset sweep.")
    experiment.add_argument("name")
    experiment.add_argument("--scale", choices=("desk", "full"), default="desk")
    experiment.add_argument("-o", "--output", type=Path, required=True)
    experiment.add_argument("--jobs", type=int, default=1)

    oracle = commands.add_parser("oracle", help="Tabulate Fourier coefficients.")
    oracle.add_argument("-c", "--config", type=Path, required=True)
    oracle.add_argument("--nmax", type=int, required=True)
    oracle.add_argument("-o", "--output", type=Path, required=True)
    oracle.add_argument("--grid", type=int, default=None)
    oracle.add_argument(
        "--refine", action="store_true", help="Compare against a doubled grid."
    )

    mnist = commands.add_parser("mnist", help="Train one-vs-all digit networks.")
    mnist.add_argument("--images", type=Path, required=True)
    mnist.add_argument("--labels", type=Path, required=True)
    mnist.add_argument("--test-images", type=Path, default=None)
    mnist.add_argument("--test-labels", type=Path, default=None)
    mnist.add_argument("--scale", choices=("desk", "full"), default="desk")
    mnist.add_argument("-o", "--output", type=Path, required=True)
    mnist.add_argument(
        "--limit", type=int, default=None, help="Use the first N training images."
    )
    mnist.add_argument("--jobs", type=int, default=1)

    replay = commands.add_parser("replay", help="Re-run from a metadata record.")
    replay.add_argument("metadata", type=Path)
    replay.add_argument("-o", "--output", type=Path, required=True)
    replay.add_argument("--jobs", type=int, default=1)
    return parser.parse_args(argv)


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "train":
        return cmd_train(args.config, args.output)
    if args.command == "experiment":
        return cmd_experiment(args.name, args.scale, args.output, args.jobs)
    if args.command == "oracle":
        return cmd_oracle(args.config, args.nmax, args.output, args.grid, args.refine)
    if args.command == "mnist":
        return cmd_mnist(
            args.images,
            args.labels,
            args.output,
            scale=args.scale,
            test_images=args.test_images,
            test_labels=args.test_labels,
            limit=args.limit,
            jobs=args.jobs,
        )
    return cmd_replay(args.metadata, args.output, args.jobs)


def main(argv: Optional[list[str]] = None) -> int:
    """Run the arff command line and return its exit status."""
    load_dotenv()
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    args = parse_args(argv)
    if args.debug:
        logger.setLevel(logging.DEBUG)
        logger.debug("Debug logging enabled")

    try:
        status = dispatch(args)
    except ArffValidationError as e:
        logger.error(f"configuration error: {e}")
        status = EXIT_CONFIG
    except ArffSolverError as e:
        logger.error(f"solver failure: {e}")
        status = EXIT_SOLVER
    except (OSError, IdxFormatError) as e:
        logger.error(f"I/O error: {e}")
        status = EXIT_IO
    except ArffError as e:
        logger.error(f"{type(e).__name__}: {e}")
        status = EXIT_SOLVER
    return status


if __name__ == "__main__":
    sys.exit(main())
