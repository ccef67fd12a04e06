"""Molecule graphs: SMILES parsing, motifs, scaffolds, descriptors."""

from gode.chem.smiles import (
    AtomNode,
    BondEdge,
    MoleculeGraph,
    SmilesSyntaxError,
    UnsupportedFeatureError,
    ValenceError,
    parse_smiles,
)
from gode.chem.canon import canonical_smiles, write_smiles
from gode.chem.motifs import MOTIF_LIBRARY, MOTIF_NAMES, MotifVector, detect_motifs
from gode.chem.labels import (
    DescriptorLengthError,
    context_label,
    descriptor_features,
    DESCRIPTOR_LENGTH_DEFAULT,
)
from gode.chem.scaffold import murcko_scaffold, scaffold_key
from gode.chem.io import MoleculeRecord, read_molecule_csv

__all__ = [
    "AtomNode",
    "BondEdge",
    "MoleculeGraph",
    "SmilesSyntaxError",
    "UnsupportedFeatureError",
    "ValenceError",
    "parse_smiles",
    "canonical_smiles",
    "write_smiles",
    "MOTIF_LIBRARY",
    "MOTIF_NAMES",
    "MotifVector",
    "detect_motifs",
    "context_label",
    "descriptor_features",
    "DescriptorLengthError",
    "DESCRIPTOR_LENGTH_DEFAULT",
    "murcko_scaffold",
    "scaffold_key",
    "MoleculeRecord",
    "read_molecule_csv",
]
