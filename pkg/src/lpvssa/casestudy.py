"""The bundled three-state, two-channel example system.

Loads the model, its signal settings and the Hankel selections that work
for it from package data.
"""

import json
from importlib import resources

from .hankel import Selection
from .model import LpvSsaModel, SignalSpec

# words whose sub-Markov values summarize the example, with their products
MARKOV_WORDS = ((1, 1), (2, 1), (1, 1, 1), (2, 2, 1), (1, 1, 1, 1))
MARKOV_LABELS = ("C A1 B1", "C A1 B2", "C A1^2 B1", "C A1 A2 B2", "C A1^3 B1")


def _raw():
    return json.loads(resources.files("lpvssa").joinpath("data/example_system.json").read_text())


def example_path():
    """Filesystem path of the bundled fixture."""
    return resources.files("lpvssa").joinpath("data/example_system.json")


def example_model():
    return LpvSsaModel.from_dict(_raw()["model"])


def example_signals():
    return SignalSpec(**_raw()["signals"])


def example_selections():
    """(deterministic selection, stochastic selection)."""
    d = _raw()
    return Selection.from_dict(d["selection_det"]), Selection.from_dict(d["selection_stoch"])


def example_settings():
    d = _raw()
    return {"n_train": d["n_train"], "n_val": d["n_val"], "max_iter": d["max_iter"]}


def example_config(known_statistics=True, **overrides):
    """Identification config with the bundled selections.

    With ``known_statistics`` the scheduling weights and input covariance
    implied by the signal settings are used instead of sample estimates.
    """
    from .identify import IdentifyConfig

    sd, ss = example_selections()
    kwargs = {"max_iter": example_settings()["max_iter"]}
    if known_statistics:
        sig = example_signals()
        model = example_model()
        kwargs.update(weights=sig.weights(model.n_mu), Lambda_u=sig.input_covariance(model.n_u))
    kwargs.update(overrides)
    return IdentifyConfig(sd, ss, **kwargs)
