"""Post-hoc fairness correction of a frozen binary classifier.

A small ratio network rescales the logit of a black-box model so that an
adversary can no longer recover the sensitive attribute from the corrected
logit, while a penalty keeps the ratio close to one so few predictions flip.
"""

from .blackbox import LogisticModel, train_logreg
from .datasets import SplitSpec, TabularDataset, load_csv, synth_biased
from .metrics import RunRecord, accuracy, p_rule, proportion_changed
from .rbmd import DebiasedModel, TrainConfig, train_advdebias, train_rbmd

__version__ = "0.1.0"

__all__ = ["LogisticModel", "train_logreg", "SplitSpec", "TabularDataset", "load_csv",
           "synth_biased", "RunRecord", "accuracy", "p_rule", "proportion_changed",
           "DebiasedModel", "TrainConfig", "train_advdebias", "train_rbmd"]
