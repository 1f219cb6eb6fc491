"""Task inference for malware from sandbox behavior attributes.

Activation-based instance and rule classifiers, from-scratch baselines, a
synthetic corpus generator with controllable mutation, a sandbox report
ingester, and an evaluation harness, behind the `taskinfer` CLI.
"""

from .actr import (
    Activation,
    IbModel,
    RuleTable,
    ib_activation,
    ib_predict,
    rb_predict,
    rb_train,
    retrieval_probs,
)
from .baselines import (
    DtModel,
    LogRegModel,
    NbModel,
    RfModel,
    TrainingError,
    dt_predict,
    dt_train,
    logreg_objective,
    logreg_predict,
    logreg_train,
    nb_predict,
    nb_train,
    rf_predict,
    rf_train,
)
from .core import (
    ActrParams,
    Corpus,
    CorpusError,
    CorpusFormatError,
    Prediction,
    Sample,
    build_corpus,
    load_corpus,
    save_corpus,
)
from .evaluation import (
    PairedTest,
    SampleScore,
    TrialReport,
    combine,
    leave_one_family_out,
    loocv,
    paired_ttest,
    score_sample,
    split_trials,
)
from .ingest import ExtractionConfig, ReportError, normalize_path, parse_report
from .methods import METHODS, train_method
from .synthgen import (
    DEFAULT_ENCRYPT_FRACTION,
    GenReport,
    GenSpec,
    GenerationError,
    encrypt_variant,
    generate,
    generate_single_task,
    measure_overlap,
)

__version__ = "0.1.0"
