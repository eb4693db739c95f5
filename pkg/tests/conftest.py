import pytest

from procuraudit.synth import SynthConfig, generate


@pytest.fixture
def synth_csv(tmp_path):
    """A small synthetic extract written to disk, plus its ground truth."""

    def make(**kw):
        cfg = SynthConfig(**{"n_contracts": 300, "anomaly_rate": 0.02, "seed": 1, **kw})
        text, truth = generate(cfg)
        path = tmp_path / f"contracts_{cfg.seed}.csv"
        path.write_text(text, encoding="utf-8")
        return path, truth

    return make


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip("."))):
        terminalreporter.write_line(line)
