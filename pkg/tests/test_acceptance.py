"""End-to-end acceptance checks, one test per release criterion.

Each test finishes by printing a single verdict line through
:func:`_verdict`; run ``pytest tests/test_acceptance.py -v -s`` to see
the lines on success (pytest shows them anyway when a test fails).  The
slow two-mode benchmark is trained once per session and shared between
the ordering and separability checks.

The digit-recognition check needs real image files and is skipped
unless both ``IEDL_MNIST_DIR`` and ``IEDL_FMNIST_DIR`` point at
directories holding the standard IDX files (plain or gzipped); see the
README for the expected names.
"""

import csv
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from iedl.cli import main
from iedl.dirichlet import differential_entropy, expected_entropy, mutual_information
from iedl.loss import kl_regularizer
from iedl.oracle import run_oracle_checks
from iedl.specfun import trigamma

SEEDS = "1,2,3,4,5"


def _verdict(num, label, passed, detail):
    state = "PASS" if passed else "FAIL"
    print(f"criterion {num} ({label}): {state} -- {detail}")
    assert passed, f"criterion {num} ({label}): {detail}"


def _aggregate_means(path):
    """Map (score, metric) -> mean from an aggregate CSV."""
    means = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            means[(row["score"], row["metric"])] = float(row["mean"])
    return means


def _train_totals(path):
    with open(path, newline="") as fh:
        return tuple(row["train_total"] for row in csv.DictReader(fh))


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    """Train and score both modes on the blob-vs-ring benchmark, 5 seeds."""
    root = tmp_path_factory.mktemp("benchmark")
    start = time.perf_counter()
    means = {}
    for mode in ("edl", "iedl"):
        out = root / mode
        assert main(["train", "--mode", mode, "--seeds", SEEDS, "--out", str(out)]) == 0
        code = main(
            ["eval", "--model-dir", str(out), "--seeds", SEEDS, "--tasks", "ood"]
        )
        assert code == 0
        means[mode] = _aggregate_means(out / "ood_aggregate.csv")
    return means, time.perf_counter() - start


def test_criterion_1_oracle_suite():
    start = time.perf_counter()
    checks = run_oracle_checks()
    elapsed = time.perf_counter() - start
    failed = [c.name for c in checks if not c.passed]
    _verdict(
        1,
        "oracle suite",
        not failed and elapsed < 60.0,
        f"{len(checks) - len(failed)}/{len(checks)} checks passed in {elapsed:.1f}s"
        + (f", failed: {failed}" if failed else ""),
    )


def test_criterion_2_golden_values():
    values = [
        ("trigamma(1)", trigamma(1.0), math.pi**2 / 6),
        ("expected_entropy(1,1)", expected_entropy([1.0, 1.0]), 0.5),
        ("mutual_information(1,1)", mutual_information([1.0, 1.0]), math.log(2) - 0.5),
        (
            "differential_entropy(1,1,1)",
            differential_entropy([1.0, 1.0, 1.0]),
            -math.log(2),
        ),
    ]
    errors = [f"{name}: got {got!r}" for name, got, want in values
              if abs(got - want) > 1e-10]
    kl = kl_regularizer(np.array([2.0, 1.0]), np.array([1.0, 0.0]))
    if kl != 0.0:
        errors.append(f"kl_regularizer((2,1),(1,0)): got {kl!r}, want exact 0.0")
    _verdict(
        2,
        "golden values",
        not errors,
        "; ".join(errors) if errors else "5/5 closed-form values match",
    )


def test_criterion_3_benchmark_ordering(benchmark):
    means, elapsed = benchmark
    pairs = [
        (score, means["iedl"][(score, "aupr")], means["edl"][(score, "aupr")])
        for score in ("alpha0", "max_p")
    ]
    ordered = all(ours >= base for _, ours, base in pairs)
    detail = ", ".join(
        f"{score} aupr {ours:.3f} vs {base:.3f}" for score, ours, base in pairs
    )
    _verdict(
        3,
        "benchmark ordering",
        ordered and elapsed < 300.0,
        f"{detail}; wall time {elapsed:.0f}s",
    )


def _find_idx(directory, stem):
    for name in (stem, stem + ".gz"):
        path = Path(directory) / name
        if path.is_file():
            return str(path)
    return None


def test_criterion_4_digit_benchmark(tmp_path):
    mnist_dir = os.environ.get("IEDL_MNIST_DIR")
    fashion_dir = os.environ.get("IEDL_FMNIST_DIR")
    if not mnist_dir or not fashion_dir:
        pytest.skip("set IEDL_MNIST_DIR and IEDL_FMNIST_DIR to run the digit check")
    paths = {
        "--idx-train-images": _find_idx(mnist_dir, "train-images-idx3-ubyte"),
        "--idx-train-labels": _find_idx(mnist_dir, "train-labels-idx1-ubyte"),
        "--idx-test-images": _find_idx(mnist_dir, "t10k-images-idx3-ubyte"),
        "--idx-test-labels": _find_idx(mnist_dir, "t10k-labels-idx1-ubyte"),
        "--idx-ood-images": _find_idx(fashion_dir, "t10k-images-idx3-ubyte"),
    }
    missing = [flag for flag, path in paths.items() if path is None]
    if missing:
        pytest.skip(f"IDX files not found for: {', '.join(missing)}")
    idx_args = [token for pair in paths.items() for token in pair]

    start = time.perf_counter()
    accuracy, ood_aupr = {}, {}
    for mode in ("edl", "iedl"):
        out = tmp_path / mode
        code = main([
            "train", "--mode", mode, "--dataset", "idx",
            "--train-subset", "10000", "--epochs", "60",
            "--seeds", SEEDS, "--out", str(out), *idx_args,
        ])
        assert code == 0
        code = main([
            "eval", "--model-dir", str(out), "--dataset", "idx",
            "--tasks", "confidence,ood", "--seeds", SEEDS, *idx_args,
        ])
        assert code == 0
        accuracy[mode] = _aggregate_means(out / "confidence_aggregate.csv")[
            ("overall", "accuracy")
        ]
        ood_aupr[mode] = _aggregate_means(out / "ood_aggregate.csv")[
            ("alpha0", "aupr")
        ]
    elapsed = time.perf_counter() - start
    passed = (
        accuracy["edl"] >= 0.90
        and accuracy["iedl"] >= 0.90
        and ood_aupr["iedl"] >= ood_aupr["edl"]
        and elapsed < 1800.0
    )
    _verdict(
        4,
        "digit benchmark",
        passed,
        f"accuracy edl {accuracy['edl']:.3f} iedl {accuracy['iedl']:.3f}, "
        f"alpha0 aupr {ood_aupr['iedl']:.3f} vs {ood_aupr['edl']:.3f}, "
        f"wall time {elapsed:.0f}s",
    )


def test_criterion_5_score_separability(benchmark):
    means, _ = benchmark
    ours = means["iedl"][("diff_ent", "energy")]
    base = means["edl"][("diff_ent", "energy")]
    _verdict(
        5,
        "score separability",
        ours > base,
        f"energy distance {ours:.3f} vs {base:.3f}",
    )


def test_criterion_6_ablation_traces(tmp_path):
    fast = [
        "--blobs-per-class", "50", "--epochs", "12", "--batch-size", "32",
        "--patience", "0", "--seeds", "3",
    ]
    configs = {
        "edl": ["--mode", "edl"],
        "edl+logdet": ["--mode", "edl", "--lambda1", "0.05"],
        "weighted-mse-only": ["--mode", "iedl", "--lambda1", "0", "--no-kl"],
        "iedl": ["--mode", "iedl"],
    }
    traces = {}
    for name, flags in configs.items():
        out = tmp_path / name
        assert main(["train", *flags, *fast, "--out", str(out)]) == 0
        traces[name] = _train_totals(out / "train_log_seed3.csv")
    names = list(traces)
    clashes = [
        (a, b)
        for i, a in enumerate(names)
        for b in names[i + 1:]
        if traces[a] == traces[b]
    ]
    _verdict(
        6,
        "ablation traces",
        not clashes,
        "4 configurations, all loss traces distinct"
        if not clashes
        else f"identical traces: {clashes}",
    )


def test_criterion_7_determinism(tmp_path):
    flags = [
        "--blobs-per-class", "25", "--test-per-class", "25", "--ring-count", "75",
        "--epochs", "5", "--batch-size", "16", "--seeds", "3",
    ]
    for run in ("a", "b"):
        base = tmp_path / run
        assert main(["train", *flags, "--out", str(base / "model")]) == 0
        code = main([
            "eval", "--model-dir", str(base / "model"),
            "--out", str(base / "metrics"), *flags[:6], "--seeds", "3",
        ])
        assert code == 0
    mismatched = []
    for rel in sorted(
        path.relative_to(tmp_path / "a")
        for path in (tmp_path / "a").rglob("*")
        if path.is_file() and path.suffix in (".csv", ".txt")
    ):
        if (tmp_path / "a" / rel).read_bytes() != (tmp_path / "b" / rel).read_bytes():
            mismatched.append(str(rel))
    manifests_match = "model/run_manifest.txt" not in mismatched
    _verdict(
        7,
        "determinism",
        manifests_match and not mismatched,
        "identical manifests, byte-identical logs and metric CSVs"
        if not mismatched
        else f"files differ: {mismatched}",
    )
