import pytest

from qcmol.errors import ConfigurationError
from qcmol.ledger import Ledger
from qcmol.manifest import (
    RunManifest, manifest_path, write_manifest, read_manifest,
)


def sample_manifest(**kwargs):
    values = dict(command="generate",
                  argv=["generate", "--out", "c.txt", "--seed", "3"],
                  version="0.1.0", settings={"n_qubits": 4, "p_rz": 0.4},
                  seeds={"seed": 3}, outputs=["c.txt"],
                  extra={"counts": [1, 2]}, started="2024-05-01T10:00:00",
                  wall_clock=1.25)
    values.update(kwargs)
    return RunManifest(**values)


def test_text_roundtrip():
    m = sample_manifest()
    assert RunManifest.from_text(m.to_text()) == m


def test_text_layout():
    text = sample_manifest().to_text()
    assert "setting.n_qubits = 4\n" in text
    assert 'command = "generate"\n' in text
    assert "extra.counts = [1, 2]\n" in text


def test_comments_and_blank_lines():
    text = "# produced by hand\n\n" + sample_manifest().to_text()
    assert RunManifest.from_text(text).command == "generate"


@pytest.mark.parametrize("text", [
    "command generate\n",
    'command = "x"\nargv = [\n',
    'command = "x"\nversion = "1"\n',
])
def test_bad_manifest(text):
    with pytest.raises(ConfigurationError):
        RunManifest.from_text(text)


def test_file_roundtrip(tmp_path):
    out = tmp_path / "runs" / "circuits.txt"
    path = write_manifest(out, sample_manifest())
    assert path == manifest_path(out)
    assert path.name == "circuits.txt.manifest"
    assert read_manifest(path) == sample_manifest()
    with pytest.raises(ConfigurationError):
        read_manifest(tmp_path / "missing.manifest")


def test_ledger_records_runs(tmp_path):
    with Ledger(tmp_path / "db" / "ledger.db") as ledger:
        first = ledger.record(sample_manifest())
        second = ledger.record(sample_manifest(command="describe",
                                               exit_code=2))
        assert second > first
        runs = ledger.runs()
        assert [r.command for r in runs] == ["generate", "describe"]
        assert ledger.runs("describe")[0].exit_code == 2
        assert ledger.settings(first) == {"n_qubits": 4, "p_rz": 0.4}


def test_ledger_survives_reopen(tmp_path):
    db = tmp_path / "ledger.db"
    with Ledger(db) as ledger:
        ledger.record(sample_manifest())
    with Ledger(db) as ledger:
        assert len(ledger.runs("generate")) == 1
