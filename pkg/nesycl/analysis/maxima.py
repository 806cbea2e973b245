"""Maximum-likelihood characterisation of the reasoning layer.

A concept distribution attains maximal likelihood for a record ``(x, y)``
exactly when all of its mass lies on concepts that satisfy the knowledge
together with ``y``:

- forward: ``NLL <= tol`` implies ``mass >= 1 - tol'`` with
  ``tol' = 1 - exp(-tol)``, since ``p(y) <= mass``
- converse: ``mass >= 1 - tol'`` implies ``NLL <= tol`` whenever every
  satisfying concept of ``y`` has a single model (``Z = 1``), since then
  ``p(y) = mass``; elsewhere the converse is reported as not applicable
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..benchmarks.tasks import Dataset
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..logger_utils import get_resilient_logger
from ..metrics.evaluation import collect_outputs
from ..models.predictors import NesyPredictor

SLACK = 1e-12
GRID_STEP = 0.05


def _log():
	return get_resilient_logger("nesycl.analysis")


def derived_tolerance(tol: float) -> float:
	return float(-np.expm1(-tol))


@dataclass
class MaximaReport:
	tol: float
	tol_mass: float
	satisfying_mass: np.ndarray
	nll: np.ndarray
	forward_violations: List[int] = field(default_factory=list)
	converse_violations: List[int] = field(default_factory=list)
	converse_not_applicable: int = 0

	@property
	def holds(self) -> bool:
		return not self.forward_violations and not self.converse_violations

	@property
	def n(self) -> int:
		return int(self.nll.shape[0])


def _single_model_labels(ck: CompiledKnowledge) -> np.ndarray:
	"""Per label index, whether every satisfying concept has Z(c;K) = 1."""
	out = np.zeros(ck.n_labels, dtype=bool)
	for li, y in enumerate(ck.label_index):
		out[li] = all(ck.model_count(c) == 1 for c in ck.satisfying_set[y])
	return out


def verify_likelihood_maxima(
	model: Union[NesyPredictor, Sequence[np.ndarray]],
	dataset: Dataset,
	ck: CompiledKnowledge,
	tol: float = 1e-3,
) -> MaximaReport:
	"""Check the likelihood / satisfying-mass biconditional on every record.

	Args:
		model: A NeSy predictor, or per-slot marginals (N x d_j arrays)
		dataset: Records; only labels are used when marginals are given
		ck: Compiled knowledge the labels are scored under
		tol: NLL tolerance

	Returns:
		MaximaReport with per-record mass and NLL and the violating indices
	"""
	if isinstance(model, NesyPredictor):
		_, marginals = collect_outputs(model, dataset, knowledge=ck)
	elif isinstance(model, (list, tuple)):
		marginals = [np.asarray(m, dtype=np.float64) for m in model]
	else:
		raise ConfigurationError(f"verify_likelihood_maxima needs a NeSy predictor or marginals, got {type(model).__name__}")

	rows = np.arange(len(dataset))
	mass = ck.mass_table(marginals).data.reshape(len(dataset), -1)[rows, dataset.labels]
	probs = ck.label_distribution(marginals).data.reshape(len(dataset), -1)[rows, dataset.labels]
	nll = -np.log(np.maximum(probs, 1e-300))
	tol_mass = derived_tolerance(tol)
	single = _single_model_labels(ck)[dataset.labels]

	report = MaximaReport(tol, tol_mass, mass, nll)
	for i in range(len(dataset)):
		if nll[i] <= tol and mass[i] < 1.0 - tol_mass - SLACK:
			report.forward_violations.append(i)
		if mass[i] >= 1.0 - tol_mass:
			if not single[i]:
				report.converse_not_applicable += 1
			elif nll[i] > tol + SLACK:
				report.converse_violations.append(i)
	_log().info(
		f"Likelihood-maxima check on {ck.name}: n={report.n} forward_violations={len(report.forward_violations)} "
		f"converse_violations={len(report.converse_violations)} not_applicable={report.converse_not_applicable}"
	)
	return report


@dataclass
class GridOracleReport:
	"""Per label index, the grid points of maximal likelihood and their satisfying mass."""

	step: float
	optima: Dict[int, List[Tuple[float, ...]]]
	optimum_mass: Dict[int, List[float]]

	@property
	def all_satisfy(self) -> bool:
		return all(abs(m - 1.0) <= 1e-12 for masses in self.optimum_mass.values() for m in masses)


def maxima_grid_oracle(ck: CompiledKnowledge, step: float = GRID_STEP) -> GridOracleReport:
	"""Exhaustive grid over factorised distributions of binary concept slots.

	Each slot's distribution is ``[1 - p, p]`` with ``p`` on a grid of the
	given step; for every label the likelihood maxima are located and their
	satisfying mass recorded.

	Raises:
		ConfigurationError: If a slot is not binary
	"""
	if any(d != 2 for d in ck.schema.cardinalities):
		raise ConfigurationError("maxima_grid_oracle needs binary concept slots")
	grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
	points = np.array(list(itertools.product(grid, repeat=ck.schema.k)))
	marginals = [np.stack([1.0 - points[:, j], points[:, j]], axis=1) for j in range(ck.schema.k)]
	likelihood = ck.label_distribution(marginals).data
	masses = ck.mass_table(marginals).data

	optima: Dict[int, List[Tuple[float, ...]]] = {}
	optimum_mass: Dict[int, List[float]] = {}
	for li in ck.reachable_labels():
		best = likelihood[:, li].max()
		where = np.flatnonzero(np.abs(likelihood[:, li] - best) <= 1e-12)
		optima[li] = [tuple(float(v) for v in points[i]) for i in where]
		optimum_mass[li] = [float(masses[i, li]) for i in where]
	return GridOracleReport(step, optima, optimum_mass)


def uniform_marginals(ck: CompiledKnowledge, n: Optional[int] = None) -> List[np.ndarray]:
	"""Uniform per-slot marginals (one row, or ``n`` rows)."""
	rows = 1 if n is None else int(n)
	return [np.full((rows, d), 1.0 / d) for d in ck.schema.cardinalities]
