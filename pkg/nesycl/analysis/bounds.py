"""Numerical checks of the concept-drift bounds on the average risk.

Risk of a model over tasks ``1..t`` (training splits)::

	L(theta) = 1/t * sum_s 1/|D_s| * sum_{(x,y) in D_s} -log p_theta(y|x;K_s)

Risk-gap check: for two models phi, psi that give every record non-zero
likelihood,

	|L(phi) - L(psi)| <= gamma * sum_s sum_x ||p_phi(C|x) - p_psi(C|x)||_1

with ``gamma = max_s 1/(beta * zeta * |D_s| * t)``, ``beta`` the smallest label
likelihood of either model, ``zeta`` the smallest positive model count and
the L1 distance taken between joint concept distributions.

Drift bound: the risk of ``theta`` over tasks ``1..t`` is at most its
current-task risk, plus the past model's risk on the past tasks, plus the
gamma-weighted concept drift on the past tasks (all divided by ``t`` where
the risk is).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..benchmarks.tasks import Task, TaskStream
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge, joint_concepts
from ..logger_utils import get_resilient_logger
from ..metrics.evaluation import collect_outputs
from ..models.predictors import NesyPredictor

BOUND_TOLERANCE = 1e-9


def _log():
	return get_resilient_logger("nesycl.analysis")


@dataclass(frozen=True)
class BoundConstants:
	beta_floor: float
	zeta: int
	gamma: float

	@property
	def applicable(self) -> bool:
		return self.beta_floor > 0 and self.zeta >= 1


@dataclass(frozen=True)
class BoundReport:
	lhs: float
	rhs: float
	constants: BoundConstants
	applicable: bool
	message: str = ""

	@property
	def holds(self) -> bool:
		"""True when the bound holds or its precondition is violated (not a failure)."""
		return not self.applicable or self.lhs <= self.rhs + BOUND_TOLERANCE


@dataclass
class _TaskOutputs:
	likelihood: np.ndarray
	joint: np.ndarray


def _outputs(model: NesyPredictor, task: Task, ck: CompiledKnowledge) -> _TaskOutputs:
	if not isinstance(model, NesyPredictor):
		raise ConfigurationError("bound checks need NeSy predictors (the CBM head has no knowledge table)")
	probs, marginals = collect_outputs(model, task.train, knowledge=ck)
	likelihood = probs[np.arange(len(task.train)), task.train.labels]
	return _TaskOutputs(likelihood, joint_concepts(marginals))


def _risk(likelihood: np.ndarray) -> float:
	"""Mean NLL of one task; infinite when a likelihood is zero."""
	if (likelihood <= 0).any():
		return float("inf")
	return float(np.mean(-np.log(likelihood)))


def compute_constants(
	likelihoods: Iterable[np.ndarray],
	compiled: Sequence[CompiledKnowledge],
	sizes: Sequence[int],
	t: int,
) -> BoundConstants:
	"""Bound constants from the data: beta and zeta are minima, gamma a maximum over tasks."""
	beta = min((float(lk.min()) for lk in likelihoods if lk.size), default=1.0)
	zeta = min((ck.min_positive_count() for ck in compiled), default=1)
	if beta <= 0 or zeta < 1:
		return BoundConstants(beta, zeta, float("inf"))
	gamma = max((1.0 / (beta * zeta * n * t) for n in sizes if n), default=0.0)
	return BoundConstants(beta, zeta, gamma)


def _drift(a: _TaskOutputs, b: _TaskOutputs) -> float:
	return float(np.abs(a.joint - b.joint).sum())


def risk_gap_check(
	model_phi: NesyPredictor,
	model_psi: NesyPredictor,
	task_stream: TaskStream,
	tasks: Optional[Sequence[Task]] = None,
) -> BoundReport:
	"""Compare the risk difference of two models with the concept-drift bound."""
	tasks = list(tasks if tasks is not None else task_stream.tasks)
	compiled = [task_stream.compiled(task) for task in tasks]
	out_phi = [_outputs(model_phi, task, ck) for task, ck in zip(tasks, compiled)]
	out_psi = [_outputs(model_psi, task, ck) for task, ck in zip(tasks, compiled)]
	t = len(tasks)
	constants = compute_constants(
		[o.likelihood for o in out_phi + out_psi], compiled, [len(task.train) for task in tasks], t
	)
	if not constants.applicable:
		return BoundReport(float("nan"), float("nan"), constants, False, "bound inapplicable: zero likelihood")

	risk_phi = sum(_risk(o.likelihood) for o in out_phi) / t
	risk_psi = sum(_risk(o.likelihood) for o in out_psi) / t
	drift = sum(_drift(a, b) for a, b in zip(out_phi, out_psi))
	report = BoundReport(abs(risk_phi - risk_psi), constants.gamma * drift, constants, True)
	if not report.holds:
		_log().error(f"Risk-gap bound violated: lhs={report.lhs:.6e} rhs={report.rhs:.6e}")
	return report


@dataclass(frozen=True)
class DriftBoundReport(BoundReport):
	current_risk: float = 0.0
	past_risk: float = 0.0
	drift: float = 0.0


def drift_bound_check(
	theta: NesyPredictor,
	theta_prev: NesyPredictor,
	task_stream: TaskStream,
	t: Optional[int] = None,
) -> DriftBoundReport:
	"""Average risk of ``theta`` over the first ``t`` tasks against its drift upper bound.

	``t`` defaults to every task of the stream; the last of them is the
	current task, the others are past tasks.
	"""
	t = len(task_stream.tasks) if t is None else int(t)
	if t < 1 or t > len(task_stream.tasks):
		raise ConfigurationError(f"drift_bound_check: t={t} outside 1..{len(task_stream.tasks)}")
	tasks = task_stream.tasks[:t]
	compiled = [task_stream.compiled(task) for task in tasks]
	now = [_outputs(theta, task, ck) for task, ck in zip(tasks, compiled)]
	prev = [_outputs(theta_prev, task, ck) for task, ck in zip(tasks[:-1], compiled[:-1])]

	constants = compute_constants(
		[o.likelihood for o in now[:-1] + prev], compiled[:-1], [len(task.train) for task in tasks[:-1]], t
	)
	current_risk = _risk(now[-1].likelihood) / t
	if not np.isfinite(current_risk) or not constants.applicable:
		return DriftBoundReport(
			float("nan"), float("nan"), constants, False, "bound inapplicable: zero likelihood"
		)
	risk = sum(_risk(o.likelihood) for o in now) / t
	past_risk = sum(_risk(o.likelihood) for o in prev) / t
	drift = sum(_drift(a, b) for a, b in zip(now[:-1], prev))
	gamma = constants.gamma if prev else 0.0
	bound = current_risk + past_risk + gamma * drift
	report = DriftBoundReport(risk, bound, constants, True, "", current_risk, past_risk, gamma * drift)
	if not report.holds:
		_log().error(f"Drift bound violated: risk={risk:.6e} bound={bound:.6e}")
	return report


@dataclass(frozen=True)
class PinskerReport:
	n: int
	violations: int
	min_slack: float

	@property
	def holds(self) -> bool:
		return self.violations == 0


def _kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
	"""Row-wise KL(p || q) with 0 log 0 = 0 and +inf where q = 0 < p."""
	with np.errstate(divide="ignore", invalid="ignore"):
		terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
	return terms.sum(axis=-1)


def pinsker_check(pairs: Iterable[Tuple[np.ndarray, np.ndarray]]) -> PinskerReport:
	"""Check ``KL(p||q) >= 0.5 * ||p - q||_1^2`` on every pair of distributions."""
	n, violations, min_slack = 0, 0, float("inf")
	for p, q in pairs:
		p = np.asarray(p, dtype=np.float64)
		q = np.asarray(q, dtype=np.float64)
		slack = np.atleast_1d(_kl(p, q) - 0.5 * np.abs(p - q).sum(axis=-1) ** 2)
		n += slack.size
		violations += int((slack < -BOUND_TOLERANCE).sum())
		min_slack = min(min_slack, float(slack.min()))
	return PinskerReport(n, violations, min_slack if n else 0.0)


def slot_pinsker_check(live: Sequence[np.ndarray], stored: Sequence[np.ndarray]) -> PinskerReport:
	"""Per-record aggregate over slots: ``sum_j KL >= (sum_j L1)^2 / (2k)``."""
	k = len(live)
	kl = sum(_kl(np.asarray(a), np.asarray(b)) for a, b in zip(live, stored))
	l1 = sum(np.abs(np.asarray(a) - np.asarray(b)).sum(axis=-1) for a, b in zip(live, stored))
	slack = np.atleast_1d(kl - l1**2 / (2.0 * k))
	return PinskerReport(slack.size, int((slack < -BOUND_TOLERANCE).sum()), float(slack.min()) if slack.size else 0.0)


def random_distribution_pairs(n: int, size: int, rng: np.random.Generator) -> List[Tuple[np.ndarray, np.ndarray]]:
	"""``n`` pairs of Dirichlet(1) distributions of the given length."""
	return [(rng.dirichlet(np.ones(size)), rng.dirichlet(np.ones(size))) for _ in range(n)]
