from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from models.errors import PreconditionError


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Hermitian operator on one site's internal basis."""
    site: str
    basis: Tuple[str, ...]
    matrix: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        dim = len(self.basis)
        if matrix.shape != (dim, dim):
            raise PreconditionError(f"operator {self.name}: shape {matrix.shape} does not match "
                                    f"{dim}-dimensional basis of {self.site}")
        if not np.allclose(matrix, matrix.conj().T, atol=1e-12, rtol=0.0):
            raise PreconditionError(f"operator {self.name} on {self.site} is not Hermitian")
        matrix.setflags(write=False)
        object.__setattr__(self, 'basis', tuple(self.basis))
        object.__setattr__(self, 'matrix', matrix)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def is_diagonal(self) -> bool:
        return np.allclose(self.matrix, np.diag(np.diag(self.matrix)), atol=1e-12, rtol=0.0)

    @property
    def is_projector(self) -> bool:
        return np.allclose(self.matrix @ self.matrix, self.matrix, atol=1e-12, rtol=0.0)

    def eigenprojectors(self, tol: float = 1e-9) -> List[Tuple[float, np.ndarray]]:
        """Spectral decomposition with degenerate eigenvalues merged."""
        values, vectors = np.linalg.eigh(self.matrix)
        groups: List[Tuple[float, np.ndarray]] = []
        for value, vec in zip(values, vectors.T):
            proj = np.outer(vec, vec.conj())
            if groups and abs(groups[-1][0] - value) <= tol:
                groups[-1] = (groups[-1][0], groups[-1][1] + proj)
            else:
                groups.append((float(value), proj))
        return groups

    def expectation(self, rho: np.ndarray) -> float:
        return float(np.real(np.trace(rho @ self.matrix)))

    def to_dict(self) -> Dict[str, Any]:
        return {'site': self.site, 'name': self.name, 'basis': list(self.basis),
                'diagonal': np.real(np.diag(self.matrix)).tolist()}

    def __str__(self) -> str:
        return f"{self.name}@{self.site}"


@dataclass(frozen=True, eq=False)
class BeableValue:
    """Expectation of a local operator plus the site's (unnormalized by occupancy) state."""
    expectation: float
    density_matrix: Optional[np.ndarray] = None
    posterior_weights: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.expectation):
            raise PreconditionError(f"beable expectation must be finite, got {self.expectation}")
        if self.density_matrix is not None:
            rho = np.array(self.density_matrix, dtype=complex)
            rho.setflags(write=False)
            object.__setattr__(self, 'density_matrix', rho)

    @property
    def trace(self) -> float:
        """Occupation probability of the site; 1 unless the site is absent in some branches."""
        if self.density_matrix is None:
            return 1.0
        return float(np.real(np.trace(self.density_matrix)))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.density_matrix)).copy()

    def is_positive_semidefinite(self, tol: float = 1e-10) -> bool:
        if self.density_matrix is None:
            return True
        return bool(np.min(np.linalg.eigvalsh(self.density_matrix)) >= -tol)

    def trace_distance_to(self, index: int) -> float:
        """Trace distance to the pure basis state |index⟩."""
        target = np.zeros_like(self.density_matrix)
        target[index, index] = 1.0
        return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(self.density_matrix - target))))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'expectation': self.expectation,
                                'posterior_weights': dict(self.posterior_weights)}
        if self.density_matrix is not None:
            data['populations'] = self.populations.tolist()
        return data


@dataclass(frozen=True, eq=False)
class BeableTrajectory:
    site: str
    operator: str
    time_grid: np.ndarray
    values: Tuple[BeableValue, ...]
    is_projector: bool = True
    # basis index of the top level; None for sites without energy levels
    excited_index: Optional[int] = None

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.ndim != 1 or len(grid) != len(self.values):
            raise PreconditionError("time grid and values must have matching length")
        if len(grid) > 1 and not np.all(np.diff(grid) > 0):
            raise PreconditionError("beable time grid must be strictly increasing")
        object.__setattr__(self, 'time_grid', grid)
        object.__setattr__(self, 'values', tuple(self.values))

    @classmethod
    def from_expectations(cls, site: str, operator: str, time_grid, expectations,
                          is_projector: bool = True) -> 'BeableTrajectory':
        return cls(site, operator, time_grid, tuple(BeableValue(float(e)) for e in expectations), is_projector)

    @property
    def expectations(self) -> np.ndarray:
        return np.array([v.expectation for v in self.values], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        """Rows of beables.csv, without the trial column; trace distance only when states were kept."""
        frame = pd.DataFrame({'site': self.site, 'operator': self.operator,
                              't_s': self.time_grid, 'expectation': self.expectations})
        if self.excited_index is not None and all(v.density_matrix is not None for v in self.values):
            frame['trace_distance_to_excited'] = [v.trace_distance_to(self.excited_index) for v in self.values]
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {'site': self.site, 'operator': self.operator,
                'time_grid': self.time_grid.tolist(),
                'expectations': self.expectations.tolist()}
