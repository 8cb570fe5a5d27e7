#!/usr/bin/env python3
"""Record console test fixtures from the real session service.

Builds a deterministic backend whose exact candidate estimates at the initial
state come out [4, 3, 3], drives the HTTP API in-process, and captures the
wire JSON the console consumes: the awaiting session, the session after
approving the top-ranked candidate, and the finished session. Re-run after
any wire format change:

    python3 scripts/record_console_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from irplan.domain import N_STATES, TERMINAL_INDEX, Incident, ResponseAction
from irplan.planner import PlannerConfig
from irplan.response_model import SyntheticModel, TransitionKernel
from irplan.service import SessionStore, create_app

REPO = Path(__file__).resolve().parents[1]
OUT = REPO / "frontend" / "fixtures"


def point_mass(hops: dict[int, int]) -> TransitionKernel:
    m = np.zeros((N_STATES, N_STATES))
    for s in range(TERMINAL_INDEX):
        m[s, hops.get(s, TERMINAL_INDEX)] = 1.0
    m[TERMINAL_INDEX, TERMINAL_INDEX] = 1.0
    return TransitionKernel(m)


def ladder_model() -> SyntheticModel:
    # "advance" walks 0 -> 7 -> 31 -> 63 (and rejoins from 1 via 1 -> 7), so
    # its exact time-to-go at state 0 is 3. "detour" only reaches state 1,
    # after which the rollout follows "advance": 4 steps total. Candidate
    # draws at state 0 are split between the two, everywhere else proposals
    # are all "advance".
    advance = point_mass({0: 7, 1: 7, 7: 31, 31: 63})
    detour = point_mass({0: 1})
    proposal = np.zeros((N_STATES, 2))
    proposal[:, 1] = 1.0
    proposal[0] = (0.5, 0.5)
    return SyntheticModel(
        actions=(
            ResponseAction(text="quarantine the initial host only", synthetic_id=0),
            ResponseAction(
                text="run the containment and forensics runbook", synthetic_id=1
            ),
        ),
        true_kernels=(detour, advance),
        model_kernels=(detour, advance),
        proposal=proposal,
        hallucinated=(False, False),
        unnecessary=(False, False),
        eta=0.0,
        seed=0,
    )


def find_seed_with_estimates(store: SessionStore, incident: Incident, want) -> int:
    # candidate draws at state 0 are (1/2, 1/2) iid, so a specific pattern
    # shows up quickly; scan seeds until the slate is exactly `want`
    for seed in range(1000):
        config = PlannerConfig(
            seed=seed, n_candidates=3, m_samples=1, exact_expectation=True
        )
        session = store.create(incident, config)
        estimates = [c.q_estimate for c in session.pending_candidates]
        if estimates == want:
            return seed
    raise SystemExit(f"no seed under 1000 yields estimates {want}")


def main() -> int:
    incident = Incident.from_json_dict(
        json.loads((REPO / "data" / "incident_ransomware.json").read_text())
    )
    kb = json.loads((REPO / "data" / "kb.json").read_text())

    scratch = SessionStore(lambda inc, cfg: ladder_model(), kb=kb)
    seed = find_seed_with_estimates(scratch, incident, [4.0, 3.0, 3.0])

    store = SessionStore(lambda inc, cfg: ladder_model(), kb=kb)
    client = TestClient(create_app(store))
    created = client.post(
        "/api/v1/sessions",
        json={
            "incident": incident.to_json_dict(),
            "config": {
                "seed": seed,
                "n_candidates": 3,
                "m_samples": 1,
                "exact_expectation": True,
            },
        },
    )
    created.raise_for_status()
    awaiting = created.json()
    estimates = [c["q_estimate"] for c in awaiting["pending_candidates"]]
    assert estimates == [4.0, 3.0, 3.0], estimates
    sid = awaiting["id"]

    top = estimates.index(min(estimates))
    stepped = client.post(
        f"/api/v1/sessions/{sid}/step", json={"candidate_index": top}
    )
    stepped.raise_for_status()
    after_top = stepped.json()

    state = after_top
    while state["status"] == "awaiting_decision":
        qs = [c["q_estimate"] for c in state["pending_candidates"]]
        state = client.post(
            f"/api/v1/sessions/{sid}/step",
            json={"candidate_index": qs.index(min(qs))},
        ).json()
    assert state["status"] == "terminal", state["status"]

    OUT.mkdir(parents=True, exist_ok=True)
    for name, payload in [
        ("session_awaiting", awaiting),
        ("session_after_top", after_top),
        ("session_terminal", state),
    ]:
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path.relative_to(REPO)}")
    print(f"seed {seed}, estimates {estimates}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
