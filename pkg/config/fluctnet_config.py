"""
FluctNet: Single Source of Truth (SSOT)
=======================================

This module defines every default the library and the command line rely on:
solver tolerances, quadrature and grid sizes, Monte Carlo parameters and the
reference networks. NEVER hard-code a tolerance elsewhere; read it from
``config.solver``.

Run configurations are JSON documents mirroring the dataclass tree below.
Enum members are given by value, matrices as row-major nested lists. A chain
may be written either site by site (``b``, ``a``, ``gammas``, ``thetas``) or
through its drive parameters (``drive``: length, b, a, gamma_bar, delta,
theta_bar, delta_theta).
"""

from __future__ import annotations

import json
import math
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

__version__ = "0.4.0"


class ConfigError(ValueError):
    """Run configuration cannot be parsed or is inconsistent."""


class NetworkPreset(Enum):
    """How the oscillator network is described."""

    CHAIN = "chain"  # Jacobi chain, reservoirs on both end sites
    TRIANGULAR = "triangular"  # six-site ring, three driven corners
    EXPLICIT = "explicit"  # omega_sq and boundary given verbatim


class OutputFormat(Enum):
    """Table format written by the command line."""

    CSV = "csv"
    JSON = "json"


class FunctionalTag(Enum):
    """Entropic functionals with a known large-deviation description."""

    CANONICAL = "canonical"  # log dP/dP~ under the steady state
    TDE_STEADY = "tde_steady"  # dissipated entropy, steady initial state
    TDE_TRANSIENT = "tde_transient"  # dissipated entropy, Dirac initial state
    TDE_QUASI_MARKOV = "tde_quasi_markov"  # dissipated entropy incl. auxiliary energy
    ENTROPY_PRODUCTION = "entropy_production"  # relative entropy production
    CANONICAL_TRANSIENT = "canonical_transient"  # canonical, Gaussian initial state


@dataclass
class SolverTolerances:
    """Numerical thresholds shared by the dense linear-algebra kernels."""

    structure_tol: float = 1e-10  # relative residual for structural identities
    imag_axis_tol: float = 1e-9  # relative distance of eigenvalues to iR
    boundary_margin: float = 1e-6  # |alpha - 1/2| within this of kappa_c = boundary
    riccati_cond_max: float = 1e10  # cond(U) limit for X = V U^-1
    riccati_residual: float = 1e-8  # accepted residual relative to 1 + ||C_alpha||
    richardson_step: float = 1e-4
    quad_tol: float = 1e-9
    quad_nodes: int = 20  # Gauss-Legendre nodes per panel
    quad_initial_panels: int = 8
    quad_max_doublings: int = 12
    eps_grid_points: int = 2048
    eps_grid_decades: float = 4.0  # log-grid spans scale * 10^(+-decades)
    zero_tol: float = 1e-12  # eps_plus below this means kappa_c = inf
    bisection_tol: float = 1e-8
    covariance_clip: float = -1e-12
    kronecker_max_dim: int = 64
    alpha_search_cap: float = 8.0  # domain search span when kappa_c = inf
    domain_grid_points: int = 64
    resolvent_norm_max: float = 1e12
    near_boundary: float = 1e-3  # derivative flagged as diverging within this


@dataclass
class ChainParams:
    """Jacobi chain: omega_sq tridiagonal with diagonal b and off-diagonal a."""

    b: List[float] = field(default_factory=lambda: [2.0, 2.0])
    a: List[float] = field(default_factory=lambda: [1.0])
    gammas: Tuple[float, float] = (1.0, 1.0)  # first, last site
    thetas: Tuple[float, float] = (1.0, 3.0)

    @classmethod
    def from_drive(
        cls,
        length: int,
        b: float,
        a: float,
        gamma_bar: float,
        delta: float,
        theta_bar: float,
        delta_theta: float,
    ) -> "ChainParams":
        """Homogeneous chain from mean coupling/temperature and their asymmetries."""
        return cls(
            b=[float(b)] * int(length),
            a=[float(a)] * (int(length) - 1),
            gammas=(gamma_bar * math.exp(delta / 2), gamma_bar * math.exp(-delta / 2)),
            thetas=(theta_bar - delta_theta / 2, theta_bar + delta_theta / 2),
        )

    @property
    def length(self) -> int:
        return len(self.b)

    @property
    def gamma_bar(self) -> float:
        return math.sqrt(self.gammas[0] * self.gammas[1])

    @property
    def delta(self) -> float:
        return math.log(self.gammas[0] / self.gammas[1])


@dataclass
class TriangularParams:
    """Six-site ring with next-nearest couplings between the driven sites."""

    u: float = 0.4
    v: float = 0.1
    theta_bar: float = 1.0
    a: float = 1.0 / (2.0 * math.sqrt(2.0))  # nearest-neighbour coupling
    b: float = 0.25  # coupling among driven sites
    gamma: float = 1.0


@dataclass
class BoundaryEntry:
    site: int
    gamma: float
    theta: float


@dataclass
class QuasiMarkovParams:
    coupling: List[List[float]] = field(default_factory=list)  # Lambda, |I| x |J|
    bath_map: List[List[float]] = field(default_factory=list)  # iota, identity if empty
    temperatures: List[float] = field(default_factory=list)


@dataclass
class ExplicitNetwork:
    omega_sq: List[List[float]] = field(default_factory=lambda: [[1.0]])
    boundary: List[BoundaryEntry] = field(default_factory=list)
    quasi_markov: Optional[QuasiMarkovParams] = None
    beta: Optional[List[List[float]]] = None  # overrides the default reference operator


@dataclass
class NetworkParams:
    preset: NetworkPreset = NetworkPreset.CHAIN
    name: str = "two_chain"
    chain: ChainParams = field(default_factory=ChainParams)
    triangular: TriangularParams = field(default_factory=TriangularParams)
    explicit: ExplicitNetwork = field(default_factory=ExplicitNetwork)


@dataclass
class GridParams:
    alpha_points: int = 41
    equilibrium_alpha_span: float = 2.0  # grid half-width around 1/2 when kappa_c = inf
    s_points: int = 81
    s_span: float = 3.0  # s-grid covers [-s_span * ep, s_span * ep]
    condition_points: int = 21


@dataclass
class SimulationParams:
    t_final: float = 50.0
    dt: float = 0.01
    n_traj: int = 10_000
    alphas: List[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    safe_band: Tuple[float, float] = (-0.2, 1.2)
    chunk_size: int = 128  # trajectories per work item; fixed so results ignore threads
    seed: Optional[int] = None
    write_samples: bool = False
    oracle: bool = True  # add the transfer-oracle value per alpha
    min_ess: float = 100.0


@dataclass
class ScanParams:
    u_values: List[float] = field(
        default_factory=lambda: [round(0.1 * k, 1) for k in range(-8, 9)]
    )
    v_values: List[float] = field(
        default_factory=lambda: [round(0.05 * k, 2) for k in range(-4, 5)]
    )
    delta_values: List[float] = field(
        default_factory=lambda: [round(0.25 * k, 2) for k in range(0, 13)]
    )


@dataclass
class OutputParams:
    directory: str = "output"
    format: OutputFormat = OutputFormat.CSV


@dataclass
class RunConfig:
    """Master configuration aggregating all parameter groups."""

    version: str = __version__
    functional: FunctionalTag = FunctionalTag.TDE_STEADY
    initial_cov: Optional[List[List[float]]] = None  # Gaussian start of canonical_transient
    threads: int = 1
    network: NetworkParams = field(default_factory=NetworkParams)
    solver: SolverTolerances = field(default_factory=SolverTolerances)
    grids: GridParams = field(default_factory=GridParams)
    simulation: SimulationParams = field(default_factory=SimulationParams)
    scan: ScanParams = field(default_factory=ScanParams)
    output: OutputParams = field(default_factory=OutputParams)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Build a run configuration from parsed JSON, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigError("configuration root must be a JSON object")
        data = dict(data)
        network = data.get("network")
        if isinstance(network, dict) and isinstance(network.get("chain"), dict):
            chain = dict(network["chain"])
            drive = chain.pop("drive", None)
            if drive is not None:
                if chain:
                    raise ConfigError("network.chain: give either 'drive' or site lists")
                try:
                    expanded = ChainParams.from_drive(**drive)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"network.chain.drive: {exc}") from exc
                chain = asdict(expanded)
            data["network"] = {**network, "chain": chain}
        return _build(cls, data, "config")

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))

    def digest_payload(self) -> Dict[str, Any]:
        """Content that determines results: everything but output placement and threads."""
        payload = self.to_dict()
        payload.pop("output", None)
        payload.pop("threads", None)
        return payload

    def validate(self, command: Optional[str] = None) -> List[str]:
        """Validate configuration for consistency before any computation."""
        errors: List[str] = []

        net = self.network
        if net.preset == NetworkPreset.CHAIN:
            chain = net.chain
            if chain.length < 1:
                errors.append("CHAIN: at least one site required")
            if len(chain.a) != max(chain.length - 1, 0):
                errors.append(
                    f"CHAIN: expected {max(chain.length - 1, 0)} couplings, got {len(chain.a)}"
                )
            if any(g <= 0 for g in chain.gammas):
                errors.append("CHAIN: reservoir couplings must be positive")
            if any(t <= 0 for t in chain.thetas):
                errors.append("CHAIN: temperatures must be positive")
        elif net.preset == NetworkPreset.TRIANGULAR:
            tri = net.triangular
            if tri.theta_bar <= 0:
                errors.append("TRIANGULAR: theta_bar must be positive")
            if tri.u >= 1:
                errors.append("TRIANGULAR: u >= 1 makes the first temperature non-positive")
        else:
            ex = net.explicit
            if not ex.boundary and ex.quasi_markov is None:
                errors.append("EXPLICIT: boundary reservoirs or quasi_markov block required")
            if any(b.theta <= 0 or b.gamma <= 0 for b in ex.boundary):
                errors.append("EXPLICIT: reservoir gamma and theta must be positive")

        if self.grids.alpha_points < 3:
            errors.append("GRIDS: alpha_points must be at least 3")
        if self.grids.s_points < 3:
            errors.append("GRIDS: s_points must be at least 3")
        if self.grids.condition_points < 2:
            errors.append("GRIDS: condition_points must be at least 2")
        if self.grids.s_span <= 0:
            errors.append("GRIDS: s_span must be positive")

        sim = self.simulation
        if sim.t_final <= 0 or sim.dt <= 0:
            errors.append("SIMULATION: t_final and dt must be positive")
        elif sim.dt > sim.t_final:
            errors.append("SIMULATION: dt exceeds t_final")
        if sim.n_traj < 2:
            errors.append("SIMULATION: n_traj must be at least 2")
        if sim.chunk_size < 1:
            errors.append("SIMULATION: chunk_size must be positive")
        if not _strictly_increasing(sim.alphas):
            errors.append("SIMULATION: alphas must be strictly increasing")
        lo, hi = sim.safe_band
        if lo >= hi:
            errors.append("SIMULATION: safe_band must satisfy low < high")
        elif any(a < lo or a > hi for a in sim.alphas):
            errors.append(f"SIMULATION: alphas outside safe band [{lo}, {hi}]")
        if command == "simulate" and sim.seed is None:
            errors.append("SIMULATION: a seed is required to simulate")

        for name in ("u_values", "v_values", "delta_values"):
            if not _strictly_increasing(getattr(self.scan, name)):
                errors.append(f"SCAN: {name} must be strictly increasing")

        if self.threads < 1:
            errors.append("RUN: threads must be at least 1")
        if self.functional == FunctionalTag.CANONICAL_TRANSIENT and self.initial_cov is None:
            errors.append("RUN: canonical_transient requires initial_cov")

        return errors

    def summary(self) -> str:
        """Generate human-readable configuration summary."""
        net = self.network
        if net.preset == NetworkPreset.CHAIN:
            detail = (
                f"Sites: {net.chain.length}  gammas: {net.chain.gammas}  "
                f"thetas: {net.chain.thetas}"
            )
        elif net.preset == NetworkPreset.TRIANGULAR:
            tri = net.triangular
            detail = f"u: {tri.u}  v: {tri.v}  theta_bar: {tri.theta_bar}"
        else:
            detail = f"Sites: {len(net.explicit.omega_sq)}  reservoirs: {len(net.explicit.boundary)}"
        return f"""
FluctNet Configuration Summary
==============================
Version: {self.version}
Functional: {self.functional.value}

NETWORK
-------
Preset: {net.preset.value} ({net.name})
{detail}

GRIDS
-----
Alpha points: {self.grids.alpha_points}
S points: {self.grids.s_points} over +-{self.grids.s_span} ep

SIMULATION
----------
t: {self.simulation.t_final}  dt: {self.simulation.dt}  trajectories: {self.simulation.n_traj}
Seed: {self.simulation.seed if self.simulation.seed is not None else "unset"}
"""


def load_config(path: Path) -> RunConfig:
    """Parse a JSON run configuration; all failures surface as ConfigError."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return RunConfig.from_dict(raw)


def _strictly_increasing(values: List[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def _plain(value: Any) -> Any:
    """Convert enums and tuples to JSON-native values."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kwargs = {name: _coerce(hints[name], value, f"{path}.{name}") for name, value in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _coerce(hint: Any, value: Any, path: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)

    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(args):
            raise ConfigError(f"{path}: expected a list of length {len(args)}")
        return tuple(_coerce(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if isinstance(hint, type) and is_dataclass(hint):
        return _build(hint, value, path)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as exc:
            choices = [m.value for m in hint]
            raise ConfigError(f"{path}: {value!r} not one of {choices}") from exc
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    return value


# Singleton instance - import this throughout the project
config = RunConfig()

# Validate on import
_errors = config.validate()
if _errors:
    import warnings

    for err in _errors:
        warnings.warn(err, UserWarning)
