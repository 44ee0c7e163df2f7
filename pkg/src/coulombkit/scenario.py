"""Scenario file ingestion.

Scenarios are JSON documents with a required ``formation`` section and
optional ``command``, ``epsilon_set`` and ``maneuver`` sections:

    {
      "formation":   {"dimension": 2, "positions": [[0, 0], [10, 0], ...]},
      "command":     {"relative_force": [...]},
      "epsilon_set": {"mode": "linear", "count": 30}
                     or {"mode": "explicit", "values": [...]},
      "maneuver":    {"masses": [...], "kappa": 0.05, "rho": 0.2,
                      "xi_des": [[...]], "xi0": [[...]], "v0": [[...]],
                      "dt": 0.1, "t_final": 60.0}
    }

Positions are meters, forces newtons, masses kilograms, times seconds.
Validation failures raise ScenarioError with the offending field.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formation import FormationState, SingularGeometryError
from .sim import ManeuverConfig


class ScenarioError(ValueError):
    """A scenario file is malformed or violates the schema."""


@dataclass(frozen=True)
class EpsilonSetSpec:
    mode: str                      # "linear" or "explicit"
    count: int = 30
    values: np.ndarray | None = None


@dataclass(frozen=True)
class Scenario:
    formation: FormationState
    command: np.ndarray | None
    epsilon_set: EpsilonSetSpec | None
    maneuver: ManeuverConfig | None


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"missing required field '{where}.{key}'")
    return mapping[key]


def _as_matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{where}' is not a numeric array: {exc}") from exc
    if arr.ndim != 2:
        raise ScenarioError(f"field '{where}' must be a list of equal-length rows")
    return arr


def _as_vector(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{where}' is not a numeric list: {exc}") from exc
    return arr


def _parse_formation(doc: dict) -> FormationState:
    section = _require(doc, "formation", "scenario")
    if not isinstance(section, dict):
        raise ScenarioError("field 'formation' must be an object")
    dimension = _require(section, "dimension", "formation")
    if dimension not in (2, 3):
        raise ScenarioError(f"formation.dimension must be 2 or 3, got {dimension!r}")
    positions = _as_matrix(_require(section, "positions", "formation"), "formation.positions")
    if positions.shape[0] < 2:
        raise ScenarioError("formation.positions needs at least 2 spacecraft")
    if positions.shape[1] != dimension:
        raise ScenarioError(
            f"formation.positions rows have length {positions.shape[1]}, "
            f"expected dimension {dimension}"
        )
    try:
        return FormationState(positions)
    except (SingularGeometryError, ValueError) as exc:
        raise ScenarioError(f"invalid formation geometry: {exc}") from exc


def _parse_command(doc: dict, state: FormationState) -> np.ndarray | None:
    if "command" not in doc:
        return None
    section = doc["command"]
    if not isinstance(section, dict):
        raise ScenarioError("field 'command' must be an object")
    force = _as_vector(_require(section, "relative_force", "command"), "command.relative_force")
    expected = state.dimension * (state.count - 1)
    if force.shape[0] != expected:
        raise ScenarioError(
            f"command.relative_force must have length dimension*(N-1) = {expected}, "
            f"got {force.shape[0]}"
        )
    return force


def _parse_epsilon_set(doc: dict) -> EpsilonSetSpec | None:
    if "epsilon_set" not in doc:
        return None
    section = doc["epsilon_set"]
    if not isinstance(section, dict):
        raise ScenarioError("field 'epsilon_set' must be an object")
    mode = _require(section, "mode", "epsilon_set")
    if mode == "linear":
        count = section.get("count", 30)
        if not isinstance(count, int) or count < 1:
            raise ScenarioError("epsilon_set.count must be a positive integer")
        return EpsilonSetSpec(mode="linear", count=count)
    if mode == "explicit":
        values = _as_vector(_require(section, "values", "epsilon_set"), "epsilon_set.values")
        if values.size == 0 or np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ScenarioError("epsilon_set.values must be nonnegative finite scalars")
        return EpsilonSetSpec(mode="explicit", values=np.sort(values))
    raise ScenarioError(f"epsilon_set.mode must be 'linear' or 'explicit', got {mode!r}")


def _parse_maneuver(
    doc: dict, state: FormationState, eps: EpsilonSetSpec | None
) -> ManeuverConfig | None:
    if "maneuver" not in doc:
        return None
    section = doc["maneuver"]
    if not isinstance(section, dict):
        raise ScenarioError("field 'maneuver' must be an object")
    d = state.dimension
    masses = _as_vector(_require(section, "masses", "maneuver"), "maneuver.masses")
    xi_des = _as_matrix(_require(section, "xi_des", "maneuver"), "maneuver.xi_des")
    xi0 = _as_matrix(_require(section, "xi0", "maneuver"), "maneuver.xi0")
    if xi0.shape != xi_des.shape or xi0.shape[1] != d:
        raise ScenarioError(
            f"maneuver.xi0 and maneuver.xi_des must both be (N-1) x {d} arrays"
        )
    v0 = None
    if "v0" in section:
        v0 = _as_matrix(section["v0"], "maneuver.v0")
    try:
        return ManeuverConfig.from_relative(
            xi0=xi0,
            xi_desired=xi_des,
            masses=masses,
            kappa=float(_require(section, "kappa", "maneuver")),
            rho=float(_require(section, "rho", "maneuver")),
            dt=float(_require(section, "dt", "maneuver")),
            t_final=float(_require(section, "t_final", "maneuver")),
            v0=v0,
            epsilon_count=eps.count if eps is not None else 30,
            epsilon_values=eps.values if eps is not None and eps.mode == "explicit" else None,
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid maneuver: {exc}") from exc


def parse_scenario(doc: dict) -> Scenario:
    """Validate a decoded scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    state = _parse_formation(doc)
    command = _parse_command(doc, state)
    eps = _parse_epsilon_set(doc)
    maneuver = _parse_maneuver(doc, state, eps)
    return Scenario(formation=state, command=command, epsilon_set=eps, maneuver=maneuver)


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_scenario(doc)


def normalize(scenario: Scenario) -> dict:
    """Canonical plain-python form of a scenario; stable under round trips."""
    doc: dict = {
        "formation": {
            "dimension": scenario.formation.dimension,
            "positions": scenario.formation.positions.tolist(),
        }
    }
    if scenario.command is not None:
        doc["command"] = {"relative_force": scenario.command.tolist()}
    if scenario.epsilon_set is not None:
        if scenario.epsilon_set.mode == "linear":
            doc["epsilon_set"] = {"mode": "linear", "count": scenario.epsilon_set.count}
        else:
            doc["epsilon_set"] = {
                "mode": "explicit",
                "values": scenario.epsilon_set.values.tolist(),
            }
    if scenario.maneuver is not None:
        cfg = scenario.maneuver
        doc["maneuver"] = {
            "masses": cfg.masses.tolist(),
            "kappa": cfg.kappa,
            "rho": cfg.rho,
            "xi_des": cfg.xi_desired.tolist(),
            "xi0": np.diff(cfg.positions0, axis=0).tolist(),
            "v0": cfg.velocities0.tolist(),
            "dt": cfg.dt,
            "t_final": cfg.t_final,
        }
    return doc


def dump_normalized(scenario: Scenario) -> str:
    return json.dumps(normalize(scenario), indent=2)
