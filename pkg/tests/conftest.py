import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_files(tmp_path, corpus_lines, label_lines):
    corpus = tmp_path / "corpus.tsv"
    labels = tmp_path / "labels.tsv"
    corpus.write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    labels.write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    return corpus, labels


# (criterion, description, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {text}: {detail}")
