"""Grammar parsing, complexity and variation of non-metric symbolic tunes."""
from .corpus import (
    Accidental, Note, NoteName, StructureTree, Tune, load_corpus, load_tune, make_tune,
    note_name_to_midi, parse_datasheet, parse_structure, serialize_datasheet, validate_tune,
)
from .errors import FormatError, GushehError, IntegrityError, NoApplicableMutation, ValidationError
from .grammar import Grammar, RuleRef, dump_grammar, expand, induce, pai, topology_dot
from .metrics import concat_analysis, edit_distance, run_experiment
from .midi_io import MidiConfig, export_midi, import_midi
from .mutation import MutationKind, MutationRecord, generate_variation, mutate, repair_clamp, repair_mirror
from .representation import (
    SETUPS, ModalFramework, SetupConfig, Token, build_modal_framework, from_tokens, to_tokens,
)

__version__ = "0.1.0"
