"""Latent-code trajectory primitives for serial-chain arms.

Learn a low-dimensional latent space of demonstrated joint trajectories with
a goal-conditioned autoencoder (continuous + discrete codes), synthesize
training data from a handful of demos, and plan new trajectories by decoding
codes and projecting the result onto the requested end-effector goal.
"""

from .augmentation import (
    AugmentationConfig,
    LabeledSample,
    build_dataset,
    generate_demos,
    load_dataset,
    sample_goal_shift,
    sample_smooth_perturbation,
    save_dataset,
)
from .errors import (
    AtpError,
    ContractViolation,
    DemoConstructionError,
    ModelIOError,
    ProjectionDidNotConverge,
    SingularJacobianError,
    TrainingDiverged,
    UnreachableGoalError,
)
from .estimators import TrajectoryAugmenter, TrajectoryAutoencoder
from .kinematics import (
    KinematicChain,
    default_chain,
    dls_solve,
    forward_kinematics,
    jacobian,
    load_chain,
    save_chain,
)
from .model import (
    AtpModel,
    LatentCode,
    TrainingConfig,
    atp_loss,
    atp_loss_and_grads,
    build_model,
    dataset_kl_profile,
    decode,
    encode,
    kl_categorical,
    kl_gaussian,
    load_model,
    reparameterize_gaussian,
    reparameterize_gumbel,
    save_model,
    train,
)
from .neuralnet import (
    AdamState,
    DenseLayer,
    DenseNet,
    adam_step,
    gradcheck,
    init_adam,
    init_dense_net,
    net_backward,
    net_forward,
)
from .planner import (
    PlanRequest,
    PlanResult,
    demo_classes,
    end_effector_path,
    evaluate_generalization,
    latent_traversal,
    plan,
    reconstruct,
    sample_goals_near_demos,
)
from .projection import (
    ProjectionConfig,
    ProjectionReport,
    chomp_smooth_step,
    goal_error,
    goal_projection_step,
    project_to_constraints,
)
from .trajectory import (
    SmoothnessOperator,
    build_smoothness_operator,
    load_trajectory,
    propagate_goal_shift,
    save_trajectory,
    smoothness_norm,
)

__version__ = "0.1.0"
