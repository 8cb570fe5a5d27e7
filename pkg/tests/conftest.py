import json
from pathlib import Path

import pytest

from irplan.domain import Incident
from irplan.response_model import SyntheticConfig, build_synthetic

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="session")
def ransomware_incident() -> Incident:
    data = json.loads((DATA_DIR / "incident_ransomware.json").read_text())
    return Incident.from_json_dict(data)


@pytest.fixture(scope="session")
def probe_incident() -> Incident:
    return Incident(
        id="probe-1",
        system_description="test probe",
        logs=("one synthetic log line",),
    )


@pytest.fixture(scope="session")
def default_model():
    """A fixed synthetic model shared by read-only tests."""
    return build_synthetic(SyntheticConfig(seed=42))


@pytest.fixture()
def corpus_dir(tmp_path) -> Path:
    """A three-incident corpus with two dataset tags."""
    incidents = {
        "a.json": ("set-one", "corpus-a"),
        "b.json": ("set-one", "corpus-b"),
        "c.json": ("set-two", "corpus-c"),
    }
    manifest = {}
    for name, (tag, incident_id) in incidents.items():
        manifest[name] = tag
        (tmp_path / name).write_text(json.dumps({
            "id": incident_id,
            "system_description": "corpus fixture",
            "logs": [f"log line for {incident_id}"],
        }))
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    return tmp_path
