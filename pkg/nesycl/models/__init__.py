from __future__ import annotations

from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .encoders import (
	MLP,
	ConceptModel,
	concept_supervision_from_marginals,
	concept_supervision_loss,
	encode_concepts,
	snapshot,
)
from .predictors import (
	CbmPredictor,
	NesyPredictor,
	Prediction,
	Predictor,
	build_predictor,
	predict_cbm,
	predict_nesy,
)

__all__ = [
	"MLP",
	"CbmPredictor",
	"ConceptModel",
	"NesyPredictor",
	"Prediction",
	"Predictor",
	"build_predictor",
	"concept_supervision_from_marginals",
	"concept_supervision_loss",
	"encode_concepts",
	"load_checkpoint",
	"predict_cbm",
	"predict_nesy",
	"read_checkpoint",
	"save_checkpoint",
	"snapshot",
]
