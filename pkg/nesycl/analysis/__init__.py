from __future__ import annotations

from .bounds import (
	BoundConstants,
	BoundReport,
	DriftBoundReport,
	PinskerReport,
	compute_constants,
	drift_bound_check,
	pinsker_check,
	random_distribution_pairs,
	risk_gap_check,
	slot_pinsker_check,
)
from .maxima import GridOracleReport, MaximaReport, maxima_grid_oracle, uniform_marginals, verify_likelihood_maxima
from .shortcuts import (
	SHORTCUT_SYSTEM,
	MapShortcutReport,
	ShortcutSolutionSet,
	bell_number,
	enumerate_additive_shortcuts,
	enumerate_map_shortcuts,
	restricted_growth_strings,
)

__all__ = [
	"SHORTCUT_SYSTEM",
	"BoundConstants",
	"BoundReport",
	"DriftBoundReport",
	"GridOracleReport",
	"MapShortcutReport",
	"MaximaReport",
	"PinskerReport",
	"ShortcutSolutionSet",
	"bell_number",
	"compute_constants",
	"drift_bound_check",
	"enumerate_additive_shortcuts",
	"enumerate_map_shortcuts",
	"maxima_grid_oracle",
	"pinsker_check",
	"random_distribution_pairs",
	"restricted_growth_strings",
	"risk_gap_check",
	"slot_pinsker_check",
	"uniform_marginals",
	"verify_likelihood_maxima",
]
