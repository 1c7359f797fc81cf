//! Evaluation: rank-based ROC-AUC, its mixture identities, and the
//! significance-testing stack used to compare algorithms across datasets.

mod roc;
mod stats;

pub use roc::{
    decompose_train_test, ks_distance, recover_normal_abnormal, roc_auc, roc_mixture_residual,
    traintest_to_normalabnormal, worst_case_addition_check, ScoredSet, TrainTestDecomposition,
    WorstCaseResiduals,
};
pub use stats::{
    average_ranks, friedman_test, holm_adjust, wilcoxon_holm, wilcoxon_signed_rank, Alternative,
    FriedmanResult, PValueMethod, PairwiseComparison, SignificanceReport, WilcoxonOptions,
    WilcoxonResult, ZeroHandling, WILCOXON_EXACT_MAX_N,
};
