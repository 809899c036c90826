"""Model-level explanations for message-passing graph classifiers.

Subpackages cover the pipeline end to end: a small autodiff engine
(:mod:`graphlens.tensor`), the graph data model (:mod:`graphlens.graphs`),
seeded dataset generators (:mod:`graphlens.datagen`), dense message-passing
classifiers (:mod:`graphlens.models`), the explanation trainer
(:mod:`graphlens.explain`), evaluation harnesses (:mod:`graphlens.evaluate`)
and the command line front end (:mod:`graphlens.cli`).
"""

__version__ = "0.1.0"
