"""
Scenario file ingestion and validation.

A scenario is a TOML file with the tables [plant], [exosystem],
[internal_model], [observer], [law], [trigger], [simulation], [initial] and
[output]. Parsing produces a Scenario holding plain data only, so it can be
sent to worker processes; build() turns it into the simulation components.
"""

import dataclasses
import logging
import re
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..controllers.hybridsim import HybridSimulator
from ..controllers.regulation import (
    BackstepLaw,
    ObserverGains,
    PolynomialGain,
    RegulationError,
    build_observer,
    lorenz_rho,
)
from ..controllers.trigger import (
    CouplingFunction,
    LorenzCoupling,
    QuadraticCoupling,
    TriggerPolicy,
    ZeroCoupling,
)
from ..models.data_models import InitialConditions, SimConfig
from ..models.enums import ControllerMode
from ..models.exogen import (
    Exosystem,
    InternalModel,
    InternalModelError,
    SteadyStateGenerator,
    synthesize,
)
from ..models.plant import LorenzParams, OutputFeedbackPlant, PlantError, lorenz_exosystem, lorenz_plant
from .matlib import MatlibError


logger = logging.getLogger(__name__)

Number = Union[int, float]
RhoSpec = Union[str, Tuple[Tuple[float, ...], ...]]

PLANT_KINDS = ("lorenz",)
EXOSYSTEM_KINDS = ("lorenz", "linear")
PI_KINDS = ("lorenz", "quadratic", "none")

_LOCATION = re.compile(r"line (\d+), column (\d+)")


class ScenarioError(Exception):
    """Base exception for scenario handling."""
    pass


class ScenarioParseError(ScenarioError):
    """Raised for malformed scenario files or fields.

    Carries the file, the offending field and, for TOML syntax errors, the
    line and column.
    """

    def __init__(self, message: str, path: Optional[Path] = None, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.field = field
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class ScenarioValidationError(ScenarioError):
    """Raised when a scenario parses but violates a dimensional or design constraint."""
    pass


class Components(NamedTuple):
    """Everything simulate() needs, built from a scenario."""
    plant: OutputFeedbackPlant
    exo: Exosystem
    gains: ObserverGains
    law: BackstepLaw
    im: InternalModel
    policy: TriggerPolicy
    cfg: SimConfig


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: plain, picklable data."""
    name: str
    plant_kind: str
    w: Tuple[float, ...]
    a_bar: Optional[Tuple[float, ...]]
    exo_kind: str
    exo_S: Optional[Tuple[Tuple[float, ...], ...]]
    exo_q: Optional[Tuple[float, ...]]
    varrho: Tuple[float, ...]
    M: Optional[Tuple[Tuple[float, ...], ...]]
    N: Optional[Tuple[float, ...]]
    lam: Tuple[float, ...]
    rho: RhoSpec
    paper_literal_vartheta1: bool
    sigma: float
    delta: float
    pi_kind: str
    pi_weight: float
    t_end: float
    h: float
    event_tol: float
    max_triggers: int
    min_dwell_guard: float
    report_stride: int
    controller_mode: ControllerMode
    tail_window: Optional[Tuple[float, float]]
    v0: Tuple[float, ...]
    z0: Tuple[float, ...]
    x0: Tuple[float, ...]
    eta0: Tuple[float, ...]
    xi_hat0: Tuple[float, ...]
    out_dir: Optional[str] = None
    source: Optional[str] = None

    def with_overrides(self, **changes: Any) -> "Scenario":
        """Return a copy with some fields replaced (for sweeps and CLI flags)."""
        return dataclasses.replace(self, **changes)

    def build(self) -> Components:
        """Construct and cross-check the simulation components.

        Raises:
            ScenarioValidationError: If any component rejects its data or the
                dimensions do not line up
        """
        try:
            components = self._build()
            HybridSimulator(*components)
        except ScenarioError:
            raise
        except (ValueError, TypeError, MatlibError, InternalModelError, PlantError, RegulationError) as e:
            raise ScenarioValidationError(f"{self.name}: {e}") from e
        return components

    def _build(self) -> Components:
        plant = self._plant()
        exo = self._exosystem()
        generator = SteadyStateGenerator(varrho=np.array(self.varrho))
        im = synthesize(
            generator,
            M=None if self.M is None else np.array(self.M),
            N=None if self.N is None else np.array(self.N),
        )
        gains = build_observer(self.lam)
        law = BackstepLaw(rho=self.rho_gains(), sigma=self.sigma, paper_literal_vartheta1=self.paper_literal_vartheta1)
        policy = TriggerPolicy(
            sigma=self.sigma,
            delta=self.delta,
            pi_r=self._coupling(im, gains),
            rho_r=law.rho[-1],
            n_eta=im.s,
        )
        cfg = SimConfig(
            t_end=self.t_end,
            w=np.array(self.w),
            init=InitialConditions(
                v=np.array(self.v0),
                z=np.array(self.z0),
                x=np.array(self.x0),
                eta=np.array(self.eta0),
                xi_hat=np.array(self.xi_hat0),
            ),
            h=self.h,
            event_tol=self.event_tol,
            max_triggers=self.max_triggers,
            min_dwell_guard=self.min_dwell_guard,
            report_stride=self.report_stride,
            controller_mode=self.controller_mode,
        )
        return Components(plant=plant, exo=exo, gains=gains, law=law, im=im, policy=policy, cfg=cfg)

    def _plant(self) -> OutputFeedbackPlant:
        if self.a_bar is None:
            params = LorenzParams(w=np.array(self.w))
        else:
            params = LorenzParams(w=np.array(self.w), a_bar=np.array(self.a_bar))
        return lorenz_plant(params)

    def _exosystem(self) -> Exosystem:
        if self.exo_kind == "lorenz":
            return lorenz_exosystem()
        q_row = np.array(self.exo_q)
        return Exosystem(S=np.array(self.exo_S), q=LinearReference(q_row), w_samples=(np.array(self.w),))

    def rho_gains(self) -> Tuple[PolynomialGain, ...]:
        if self.rho == "lorenz":
            return lorenz_rho()
        return tuple(PolynomialGain(coeffs) for coeffs in self.rho)

    def _coupling(self, im: InternalModel, gains: ObserverGains) -> CouplingFunction:
        if self.pi_kind == "lorenz":
            return LorenzCoupling(psi=im.Psi, lam=gains.lam)
        if self.pi_kind == "quadratic":
            return QuadraticCoupling(weight=self.pi_weight)
        return ZeroCoupling()


class LinearReference:
    """Reference output y0 = q . v, picklable."""

    def __init__(self, q_row: np.ndarray):
        self.q_row = np.asarray(q_row, dtype=np.float64)

    def __call__(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(self.q_row @ v)


# Field readers

class _Table:
    """Typed access to one TOML table with error locations."""

    def __init__(self, data: Dict[str, Any], name: str, path: Optional[Path]):
        self.data = data
        self.name = name
        self.path = path

    def _error(self, key: str, message: str) -> ScenarioParseError:
        return ScenarioParseError(message, path=self.path, field=f"{self.name}.{key}")

    def has(self, key: str) -> bool:
        return key in self.data

    def number(self, key: str, default: Optional[Number] = None) -> float:
        if key not in self.data:
            if default is None:
                raise self._error(key, "missing required number")
            return float(default)
        value = self.data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self._error(key, f"expected a number, got {type(value).__name__}")
        return float(value)

    def integer(self, key: str, default: int) -> int:
        value = self.data.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self._error(key, f"expected an integer, got {type(value).__name__}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        value = self.data.get(key, default)
        if not isinstance(value, bool):
            raise self._error(key, f"expected true or false, got {type(value).__name__}")
        return value

    def choice(self, key: str, options: Sequence[str], default: Optional[str] = None) -> str:
        value = self.data.get(key, default)
        if value is None:
            raise self._error(key, "missing required value")
        if value not in options:
            raise self._error(key, f"expected one of {', '.join(options)}, got {value!r}")
        return value

    def vector(self, key: str, required: bool = True) -> Optional[Tuple[float, ...]]:
        if key not in self.data:
            if required:
                raise self._error(key, "missing required list of numbers")
            return None
        return self._numbers(key, self.data[key])

    def matrix(self, key: str, required: bool = True) -> Optional[Tuple[Tuple[float, ...], ...]]:
        if key not in self.data:
            if required:
                raise self._error(key, "missing required matrix")
            return None
        rows = self.data[key]
        if not isinstance(rows, list) or not rows:
            raise self._error(key, "expected a non-empty list of rows")
        return tuple(self._numbers(key, row) for row in rows)

    def _numbers(self, key: str, value: Any) -> Tuple[float, ...]:
        if not isinstance(value, list) or not value:
            raise self._error(key, "expected a non-empty list of numbers")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in value):
            raise self._error(key, "list entries must be numbers")
        return tuple(float(x) for x in value)


def _table(doc: Dict[str, Any], name: str, path: Optional[Path], required: bool = True) -> _Table:
    data = doc.get(name)
    if data is None:
        if required:
            raise ScenarioParseError("missing table", path=path, field=name)
        data = {}
    if not isinstance(data, dict):
        raise ScenarioParseError("expected a table", path=path, field=name)
    return _Table(data, name, path)


def _rho_spec(law: _Table) -> RhoSpec:
    value = law.data.get("rho", "lorenz")
    if value == "lorenz":
        return "lorenz"
    if isinstance(value, list) and value and all(isinstance(row, list) for row in value):
        return tuple(law._numbers("rho", row) for row in value)
    raise law._error("rho", "expected \"lorenz\" or a list of coefficient lists (ascending powers)")


def parse_scenario(text: str, path: Optional[Path] = None, name: Optional[str] = None) -> Scenario:
    """Parse scenario TOML text.

    Raises:
        ScenarioParseError: On TOML syntax errors or malformed fields
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        column = getattr(e, "colno", None)
        if line is None:
            match = _LOCATION.search(str(e))
            if match:
                line, column = int(match.group(1)), int(match.group(2))
        raise ScenarioParseError(f"invalid TOML: {e}", path=path, line=line, column=column) from e

    plant = _table(doc, "plant", path)
    exo = _table(doc, "exosystem", path, required=False)
    imodel = _table(doc, "internal_model", path)
    observer = _table(doc, "observer", path)
    law = _table(doc, "law", path, required=False)
    trig = _table(doc, "trigger", path)
    sim = _table(doc, "simulation", path)
    init = _table(doc, "initial", path)
    output = _table(doc, "output", path, required=False)

    exo_kind = exo.choice("kind", EXOSYSTEM_KINDS, default="lorenz")
    exo_S = exo.matrix("S", required=exo_kind == "linear")
    exo_q = exo.vector("q", required=exo_kind == "linear")

    if imodel.has("M") != imodel.has("N"):
        raise ScenarioParseError("M and N must be given together", path=path, field="internal_model")

    tail_window = None
    if sim.has("tail_window"):
        bounds = sim.vector("tail_window")
        if bounds is None or len(bounds) != 2:
            raise ScenarioParseError("expected [t_a, t_b]", path=path, field="simulation.tail_window")
        tail_window = (bounds[0], bounds[1])

    out_dir = output.data.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ScenarioParseError("expected a path string", path=path, field="output.dir")

    scenario = Scenario(
        name=name or (path.stem if path is not None else "scenario"),
        plant_kind=plant.choice("kind", PLANT_KINDS, default="lorenz"),
        w=plant.vector("w"),
        a_bar=plant.vector("a_bar", required=False),
        exo_kind=exo_kind,
        exo_S=exo_S,
        exo_q=exo_q,
        varrho=imodel.vector("varrho"),
        M=imodel.matrix("M", required=False),
        N=imodel.vector("N", required=False),
        lam=observer.vector("lambda"),
        rho=_rho_spec(law),
        paper_literal_vartheta1=law.boolean("paper_literal_vartheta1", False),
        sigma=trig.number("sigma"),
        delta=trig.number("delta"),
        pi_kind=trig.choice("pi", PI_KINDS, default="lorenz"),
        pi_weight=trig.number("pi_weight", 1.0),
        t_end=sim.number("t_end"),
        h=sim.number("h", 1e-4),
        event_tol=sim.number("event_tol", 1e-9),
        max_triggers=sim.integer("max_triggers", 1_000_000),
        min_dwell_guard=sim.number("min_dwell_guard", 1e-7),
        report_stride=sim.integer("report_stride", 10),
        controller_mode=ControllerMode(sim.choice(
            "controller_mode", [mode.value for mode in ControllerMode], default=ControllerMode.CONTINUOUS.value
        )),
        tail_window=tail_window,
        v0=init.vector("v"),
        z0=init.vector("z"),
        x0=init.vector("x"),
        eta0=init.vector("eta"),
        xi_hat0=init.vector("xi_hat"),
        out_dir=out_dir,
        source=str(path) if path is not None else None,
    )
    logger.debug(f"Parsed scenario '{scenario.name}' (delta={scenario.delta}, sigma={scenario.sigma})")
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and parse a scenario file.

    Raises:
        ScenarioParseError: If the file cannot be read or parsed
    """
    scenario_path = Path(path)
    try:
        text = scenario_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioParseError(f"cannot read scenario: {e}", path=scenario_path) from e
    return parse_scenario(text, path=scenario_path)


def parse_float_list(text: str) -> List[float]:
    """Parse a comma-separated list of numbers such as ``0.1,0.01``."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise ScenarioParseError(f"not a number: {item!r}") from None
    if not values:
        raise ScenarioParseError("expected at least one value")
    return values
