"""Shared fixtures: the synthetic benchmark corpus and the acceptance summary.

Acceptance tests carry ``@pytest.mark.criterion(label, text)`` and record
their measured values with ``record_property``; one PASS/FAIL line per
criterion is printed at the end of the run.
"""

import os
from dataclasses import dataclass
from pathlib import Path

import pytest

from fdeskew import dataset

CORPUS_DOCS = 50
CORPUS_SEED = 2021
SKEW_SEED = 7
PER_IMAGE = 5

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label, text = marker.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if report.when == "call" or failed:
        measured = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        prev = _outcomes.get(label)
        if prev is None or prev[0] == "PASS":
            _outcomes[label] = ("FAIL" if failed else "PASS", text, measured)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        status, text, measured = _outcomes[label]
        line = f"[{status}] criterion {label}: {text}"
        if measured:
            line += f" ({measured})"
        terminalreporter.write_line(line)


@dataclass(frozen=True)
class Corpus:
    base: Path
    narrow: dataset.DatasetManifest  # +-15 degrees, split into dev/test
    wide: dataset.DatasetManifest  # +-44.9 degrees


def build_corpus(base: Path) -> Corpus:
    """Render, skew and split the benchmark corpus under ``base``.

    Paths inside the manifests are relative to ``base``, so two builds in
    different directories produce byte-identical manifests.
    """
    cwd = os.getcwd()
    os.chdir(base)
    try:
        dataset.synth_corpus(CORPUS_DOCS, "straight", seed=CORPUS_SEED)
        narrow = dataset.generate_skew_dataset("straight", (-15, 15), PER_IMAGE, SKEW_SEED, "d15")
        dataset.split_dev_test(narrow, 0.7, 0).write("d15")
        dataset.generate_skew_dataset("straight", (-44.9, 44.9), PER_IMAGE, SKEW_SEED, "d45")
    finally:
        os.chdir(cwd)
    return Corpus(base, dataset.load_manifest(base / "d15"), dataset.load_manifest(base / "d45"))


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))
