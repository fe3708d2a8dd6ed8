"""Central configuration: every tolerance and cap the analyzers use, with
the precedence command-line flags > config file (complin.toml, or the path
in COMPLIN_CONFIG) > built-in defaults.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ComplinError

ENV_VAR = "COMPLIN_CONFIG"
DEFAULT_FILENAME = "complin.toml"


@dataclass(frozen=True)
class Config:
    """Named tolerances and caps referenced by tests and the CLI."""

    # symmetry search
    degree_cap: int = 2
    degree_cap_max: int = 4
    ansatz_max_entries: int = 2_000_000

    # trajectory inversion
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    jacobian_tol: float = 1e-10

    # numeric verification
    rk4_step: float = 1e-3
    trajectory_tol: float = 1e-6
    closed_form_tol: float = 1e-8
    stencil_residual_tol: float = 1e-5

    # series solutions
    series_tail_tol: float = 1e-12
    series_disc_radius: float = 2.0

    def validated(self) -> "Config":
        if not 1 <= self.degree_cap <= self.degree_cap_max:
            raise ComplinError("degree_cap must be in [1, %d]"
                               % self.degree_cap_max)
        return self


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Resolve the configuration: explicit path, else COMPLIN_CONFIG, else
    ./complin.toml if present, else defaults; overrides win over the file."""
    values: dict = {}
    file_path = path or os.environ.get(ENV_VAR)
    if file_path is None and Path(DEFAULT_FILENAME).is_file():
        file_path = DEFAULT_FILENAME
    if file_path:
        try:
            with open(file_path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ComplinError("cannot read config %s: %s" % (file_path, exc))
        except tomllib.TOMLDecodeError as exc:
            raise ComplinError("bad TOML in %s: %s" % (file_path, exc))
        known = {f.name: f.type for f in dataclasses.fields(Config)}
        for key, val in doc.items():
            if key not in known:
                raise ComplinError("unknown config key %r in %s"
                                   % (key, file_path))
            values[key] = val
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**values).validated()
