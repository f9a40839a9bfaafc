"""Decoupled symptom inquiry and disease diagnosis.

A causal transformer decoder proposes the next symptom to ask about, a
position-free bidirectional encoder classifies the disease from the collected
symptoms, and a confidence threshold decides when to stop asking. Trained
jointly with a policy-gradient reward for inquiry and cross-entropy for
diagnosis.
"""

__version__ = "0.1.0"

from .corpus import (
    Attribute,
    CoOccurrence,
    CorpusError,
    StructuredMCR,
    Vocabulary,
    build_cooccurrence,
    build_vocabulary,
    load_corpus,
    save_corpus,
)
from .env import (
    DialogueState,
    PatientSimulator,
    Trajectory,
    classifier_view,
    new_session,
    respond,
    step,
)
from .estimator import DialogueDiagnoser
from .evaluation import (
    BoundsReport,
    EvalReport,
    RuleAgentPolicy,
    bounds,
    bounds_report,
    evaluate,
    rule_agent_next,
    sweep,
    symptom_recall,
)
from .model import (
    DiagnosisModel,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    RewardConfig,
    TrainConfig,
    ground_reward,
    pretrain,
    priori_reward,
    reinforce_loss,
    rollout,
    train_joint,
)

__all__ = [
    "__version__",
    "Attribute",
    "CoOccurrence",
    "CorpusError",
    "StructuredMCR",
    "Vocabulary",
    "build_cooccurrence",
    "build_vocabulary",
    "load_corpus",
    "save_corpus",
    "DialogueState",
    "PatientSimulator",
    "Trajectory",
    "classifier_view",
    "new_session",
    "respond",
    "step",
    "DialogueDiagnoser",
    "BoundsReport",
    "EvalReport",
    "RuleAgentPolicy",
    "bounds",
    "bounds_report",
    "evaluate",
    "rule_agent_next",
    "sweep",
    "symptom_recall",
    "DiagnosisModel",
    "ModelConfig",
    "load_checkpoint",
    "save_checkpoint",
    "RewardConfig",
    "TrainConfig",
    "ground_reward",
    "pretrain",
    "priori_reward",
    "reinforce_loss",
    "rollout",
    "train_joint",
]
